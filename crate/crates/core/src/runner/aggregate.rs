use std::io::Write;
use std::path::{Path, PathBuf};

use super::RunError;

/// Per-episode mean and population standard deviation of every metric column.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub series: String,
    pub episodes: Vec<usize>,
    /// Metric names, e.g. `success_rate`, `critic_loss_l0`.
    pub columns: Vec<String>,
    /// `mean[row][col]`; `None` where no input file had a value.
    pub mean: Vec<Vec<Option<f64>>>,
    pub std: Vec<Vec<Option<f64>>>,
}

struct Table {
    header: Vec<String>,
    episodes: Vec<usize>,
    cells: Vec<Vec<Option<f64>>>,
}

fn read_table(path: &Path) -> Result<Table, RunError> {
    let bad = |m: String| RunError::Aggregate(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let ep_col = header.iter().position(|h| h == "episode").ok_or_else(|| bad("no episode column".into()))?;
    let mut episodes = Vec::new();
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        episodes.push(rec[ep_col].parse().map_err(|_| bad(format!("bad episode {:?}", &rec[ep_col])))?);
        let row = rec
            .iter()
            .map(|c| if c.is_empty() { Ok(None) } else { c.parse().map(Some).map_err(|_| bad(format!("bad number {c:?}"))) })
            .collect::<Result<Vec<_>, _>>()?;
        cells.push(row);
    }
    Ok(Table { header, episodes, cells })
}

/// Population mean and standard deviation of the present values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}

/// Aggregates metrics files whose rows align on the episode column.
pub fn aggregate(files: &[PathBuf], series: &str) -> Result<Aggregated, RunError> {
    if files.is_empty() {
        return Err(RunError::Aggregate("no input files".into()));
    }
    let tables = files.iter().map(|f| read_table(f)).collect::<Result<Vec<_>, _>>()?;
    let first = &tables[0];
    let offending: Vec<String> = files
        .iter()
        .zip(&tables)
        .filter(|(_, t)| t.header != first.header || t.episodes != first.episodes)
        .map(|(f, _)| f.display().to_string())
        .collect();
    if !offending.is_empty() {
        return Err(RunError::Aggregate(format!(
            "rows do not align with {}: {}",
            files[0].display(),
            offending.join(", ")
        )));
    }
    let metric_cols: Vec<usize> = (0..first.header.len()).filter(|&c| first.header[c] != "seed" && first.header[c] != "episode").collect();
    let mut mean = Vec::with_capacity(first.episodes.len());
    let mut std = Vec::with_capacity(first.episodes.len());
    for r in 0..first.episodes.len() {
        let (m, s): (Vec<_>, Vec<_>) = metric_cols
            .iter()
            .map(|&c| {
                let vals: Vec<f64> = tables.iter().filter_map(|t| t.cells[r][c]).collect();
                mean_std(&vals).map_or((None, None), |(m, s)| (Some(m), Some(s)))
            })
            .unzip();
        mean.push(m);
        std.push(s);
    }
    Ok(Aggregated {
        series: series.to_string(),
        episodes: first.episodes.clone(),
        columns: metric_cols.iter().map(|&c| first.header[c].clone()).collect(),
        mean,
        std,
    })
}

impl Aggregated {
    /// CSV with `series,episode` followed by `{metric}_mean,{metric}_std` pairs.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["series".to_string(), "episode".into()];
        for c in &self.columns {
            header.push(format!("{c}_mean"));
            header.push(format!("{c}_std"));
        }
        w.write_record(&header)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (r, ep) in self.episodes.iter().enumerate() {
            let mut row = vec![self.series.clone(), ep.to_string()];
            for c in 0..self.columns.len() {
                row.push(cell(self.mean[r][c]));
                row.push(cell(self.std[r][c]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn identical_files_have_zero_std() {
        let dir = tempfile::tempdir().unwrap();
        let body = "seed,episode,success_rate\n0,10,0.3\n0,20,0.7\n";
        let files = vec![write(dir.path(), "a.csv", body), write(dir.path(), "b.csv", body)];
        let agg = aggregate(&files, "x").unwrap();
        assert!(agg.std.iter().flatten().all(|s| *s == Some(0.0)));
        assert_eq!(agg.mean[1][0], Some(0.7));
    }

    #[test]
    fn two_seed_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            write(dir.path(), "a.csv", "seed,episode,success_rate\n0,10,0.4\n"),
            write(dir.path(), "b.csv", "seed,episode,success_rate\n1,10,0.6\n"),
        ];
        let agg = aggregate(&files, "x").unwrap();
        assert!((agg.mean[0][0].unwrap() - 0.5).abs() < 1e-15);
        assert!((agg.std[0][0].unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn misaligned_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            write(dir.path(), "a.csv", "seed,episode,success_rate\n0,10,0.4\n0,20,0.5\n"),
            write(dir.path(), "b.csv", "seed,episode,success_rate\n1,10,0.6\n1,30,0.5\n"),
            write(dir.path(), "c.csv", "seed,episode,success_rate\n2,10,0.6\n"),
        ];
        let msg = aggregate(&files, "x").unwrap_err().to_string();
        let listed = msg.rsplit_once(": ").unwrap().1;
        assert!(listed.contains("b.csv") && listed.contains("c.csv") && !listed.contains("a.csv"), "{msg}");
    }

    #[test]
    fn empty_cells_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            write(dir.path(), "a.csv", "seed,episode,success_rate,fw_loss_l0\n0,10,0.4,\n"),
            write(dir.path(), "b.csv", "seed,episode,success_rate,fw_loss_l0\n1,10,0.6,\n"),
        ];
        let agg = aggregate(&files, "x").unwrap();
        assert_eq!(agg.mean[0][1], None);
        let mut buf = Vec::new();
        agg.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "series,episode,success_rate_mean,success_rate_std,fw_loss_l0_mean,fw_loss_l0_std\nx,10,0.5,0.09999999999999998,,\n");
    }
}
