use std::io::Write;

/// Per-layer statistics accumulated between two test batches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerMetrics {
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub fw_loss: Option<f64>,
    pub curiosity_mean: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    /// Training episodes completed when the test batch ran.
    pub episode: usize,
    pub success_rate: f64,
    pub layers: Vec<LayerMetrics>,
}

const LAYER_FIELDS: [&str; 6] = ["critic_loss", "actor_objective", "fw_loss", "curiosity_mean", "r_min", "r_max"];

pub fn metrics_header(k: usize) -> Vec<String> {
    let mut h = vec!["seed".to_string(), "episode".into(), "success_rate".into()];
    for i in 0..k {
        h.extend(LAYER_FIELDS.iter().map(|f| format!("{f}_l{i}")));
    }
    h
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.seed.to_string(), self.episode.to_string(), self.success_rate.to_string()];
        for l in &self.layers {
            r.extend([l.critic_loss, l.actor_objective, l.fw_loss, l.curiosity_mean, l.r_min, l.r_max].map(cell));
        }
        r
    }
}

/// Streams metrics rows as CSV, header first.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, k: usize) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(metrics_header(k))?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> csv::Result<()> {
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_line_up() {
        let row = MetricsRow {
            seed: 3,
            episode: 10,
            success_rate: 0.25,
            layers: vec![
                LayerMetrics { critic_loss: Some(0.5), actor_objective: Some(-2.0), ..Default::default() },
                LayerMetrics::default(),
            ],
        };
        let mut buf = Vec::new();
        MetricsWriter::new(&mut buf, 2).unwrap().write(&row).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), 15);
        assert!(lines[0].starts_with("seed,episode,success_rate,critic_loss_l0,actor_objective_l0,fw_loss_l0"));
        assert_eq!(lines[1], "3,10,0.25,0.5,-2,,,,,,,,,,");
    }
}
