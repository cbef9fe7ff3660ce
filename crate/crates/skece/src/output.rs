//! Result files: CSV with `#` provenance lines, or a JSON document with a
//! `provenance` object next to the rows.

use std::io::Write;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Serialize)]
struct Provenance<'a, S> {
    tool: &'static str,
    version: &'static str,
    spec: &'a S,
}

fn provenance<S>(spec: &S) -> Provenance<'_, S> {
    Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec,
    }
}

/// `# {"tool":...,"spec":{...}}` for files whose format allows comments.
pub fn comment_header<S: Serialize>(spec: &S) -> serde_json::Result<String> {
    Ok(format!("# {}\n", serde_json::to_string(&provenance(spec))?))
}

pub fn write_table<W: Write, S: Serialize, T: Serialize>(
    mut out: W,
    spec: &S,
    rows: &[T],
    format: Format,
) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            out.write_all(comment_header(spec)?.as_bytes())?;
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a, S, T> {
                provenance: Provenance<'a, S>,
                rows: &'a [T],
            }
            serde_json::to_writer_pretty(
                &mut out,
                &Doc {
                    provenance: provenance(spec),
                    rows,
                },
            )?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}
