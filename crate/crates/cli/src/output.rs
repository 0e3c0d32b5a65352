//! Table emission.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use voi_core::montecarlo::DataTable;

use crate::{Failure, Format, OutputArgs};

/// The `--seed` value, or a fresh one that is logged.
pub fn resolve_seed(out: &OutputArgs) -> u64 {
    out.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed} (entropy; pass --seed {seed} to reproduce)");
        seed
    })
}

/// Writes the table. CSV metadata goes to `<out>.meta.json`, or to stderr
/// when the table itself goes to stdout.
pub fn emit(table: &DataTable, out: &OutputArgs) -> Result<(), Failure> {
    match out.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&table.to_json()).expect("table serializes");
            write_to(out.out.as_deref(), |w| writeln!(w, "{text}"))
        }
        Format::Csv => {
            write_to(out.out.as_deref(), |w| table.write_csv(w))?;
            let meta = serde_json::to_string_pretty(&table.meta).expect("metadata serializes");
            match &out.out {
                Some(path) => {
                    let side = sidecar(path);
                    std::fs::write(&side, meta + "\n").map_err(Failure::io)
                }
                None => {
                    eprintln!("{}", serde_json::to_string(&table.meta).expect("metadata serializes"));
                    Ok(())
                }
            }
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_to(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(Failure::io)?);
            body(&mut w).and_then(|_| w.flush()).map_err(Failure::io)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush()).map_err(Failure::io)
        }
    }
}
