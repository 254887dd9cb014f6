//! Energy log in CSV form, one row per accepted level.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::energy::EnergyRecord;

pub const ENERGY_CSV_HEADER: &str =
    "level,time,E,E_mod,l2,l4,linf,bound_lhs,bound_rhs,newton_iters,residual";

/// One CSV row; reals use 17 significant digits.
pub fn energy_csv_row(r: &EnergyRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        r.level,
        r.time,
        r.energy,
        r.modified_energy,
        r.l2,
        r.l4,
        r.linf,
        r.bound_lhs,
        r.bound_rhs,
        r.newton_iters,
        r.residual
    )
}

pub fn energy_csv_string(records: &[EnergyRecord]) -> String {
    let mut s = String::from(ENERGY_CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&energy_csv_row(r));
        s.push('\n');
    }
    s
}

/// Streaming writer that flushes after every row.
pub struct EnergyCsvWriter {
    out: BufWriter<File>,
}

impl EnergyCsvWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{ENERGY_CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    /// Opens an existing log for appending.
    pub fn append(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, r: &EnergyRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", energy_csv_row(r))?;
        self.out.flush()
    }
}

/// Drops every row whose level exceeds `level`; a missing file is recreated with only the header.
pub fn truncate_energy_csv(path: &Path, level: usize) -> std::io::Result<()> {
    let mut kept = vec![ENERGY_CSV_HEADER.to_string()];
    if path.exists() {
        let reader = BufReader::new(File::open(path)?);
        for line in reader.lines().skip(1) {
            let line = line?;
            let row_level = line.split(',').next().and_then(|s| s.parse::<usize>().ok());
            match row_level {
                Some(l) if l <= level => kept.push(line),
                _ => {}
            }
        }
    }
    let mut text = kept.join("\n");
    text.push('\n');
    std::fs::write(path, text)
}
