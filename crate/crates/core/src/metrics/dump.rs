use std::io::{BufRead, Write};

use super::{Metric, MetricsError, PerUserBiasRecord};
use crate::dataset::Gender;
use crate::recommenders::Algorithm;

const FIXED_COLUMNS: [&str; 4] = ["user_id", "gender", "algorithm", "fold"];

fn header() -> String {
    let mut cols: Vec<&str> = FIXED_COLUMNS.to_vec();
    cols.extend(Metric::ALL.iter().map(|m| m.name()));
    cols.push("undefined");
    cols.join("\t")
}

/// Writes one line per record. Values use the shortest representation that
/// parses back to the same `f64`; undefined values are `NA` and are also
/// listed in the trailing `undefined` column (`-` when none).
pub fn write_per_user<W: Write>(records: &[PerUserBiasRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header())?;
    for r in records {
        write!(out, "{}\t{}\t{}\t{}", r.user_id, r.gender.code(), r.algorithm, r.fold)?;
        let mut undefined = Vec::new();
        for m in Metric::ALL {
            match r.value(m) {
                Some(v) => write!(out, "\t{v}")?,
                None => {
                    undefined.push(m.name());
                    write!(out, "\tNA")?
                }
            }
        }
        let flags = if undefined.is_empty() { "-".to_string() } else { undefined.join(",") };
        writeln!(out, "\t{flags}")?;
    }
    Ok(())
}

pub fn read_per_user<R: BufRead>(source: R) -> Result<Vec<PerUserBiasRecord>, MetricsError> {
    let err = |line: usize, message: String| MetricsError::Parse { line, message };
    let mut lines = source.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == header() => {}
        Some((_, Ok(h))) => return Err(err(1, format!("unexpected header {h:?}"))),
        Some((_, Err(e))) => return Err(err(1, e.to_string())),
        None => return Err(err(1, "missing header".into())),
    }
    let mut records = Vec::new();
    for (k, line) in lines {
        let n = k + 1;
        let line = line.map_err(|e| err(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != FIXED_COLUMNS.len() + Metric::ALL.len() + 1 {
            return Err(err(n, format!("expected 13 columns, found {}", f.len())));
        }
        let algorithm: Algorithm = f[2].parse().map_err(|e: String| err(n, e))?;
        let fold: usize = f[3].parse().map_err(|_| err(n, format!("bad fold {:?}", f[3])))?;
        let mut values = [None; 8];
        for (k, m) in Metric::ALL.iter().enumerate() {
            let raw = f[4 + k];
            values[k] = match raw {
                "NA" => None,
                v => Some(v.parse::<f64>().map_err(|_| err(n, format!("bad {m} value {v:?}")))?),
            };
        }
        let flagged: Vec<&str> = match f[12] {
            "-" => vec![],
            s => s.split(',').collect(),
        };
        for (k, m) in Metric::ALL.iter().enumerate() {
            if values[k].is_none() != flagged.contains(&m.name()) {
                return Err(err(n, format!("undefined flags disagree with {m} value")));
            }
        }
        let required = |m: Metric| values[m.position()].ok_or_else(|| err(n, format!("{m} cannot be undefined")));
        records.push(PerUserBiasRecord {
            user_id: f[0].to_string(),
            gender: Gender::parse(f[1]),
            algorithm,
            fold,
            pct_delta: [values[0], values[1], values[2], values[3], values[4]],
            kl: required(Metric::Kl)?,
            kendall_tau: values[Metric::KendallTau.position()],
            ndcg_at_10: required(Metric::NdcgAt10)?,
        });
    }
    Ok(records)
}
