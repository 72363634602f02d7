use std::io::Write;

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub achieved: bool,
}

/// Writes `t, s0.., a0.., reward, achieved` rows with a header.
pub fn write_trajectory_csv<W: Write>(steps: &[TrajectoryStep], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (sd, ad) = steps.first().map_or((0, 0), |s| (s.state.len(), s.action.len()));
    let mut header = vec!["t".to_string()];
    header.extend((0..sd).map(|i| format!("s{i}")));
    header.extend((0..ad).map(|i| format!("a{i}")));
    header.push("reward".into());
    header.push("achieved".into());
    w.write_record(&header)?;
    for s in steps {
        let mut row = vec![s.t.to_string()];
        row.extend(s.state.iter().map(f64::to_string));
        row.extend(s.action.iter().map(f64::to_string));
        row.push(s.reward.to_string());
        row.push(u8::from(s.achieved).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let steps = vec![TrajectoryStep { t: 0, state: vec![0.5, -1.0], action: vec![1.0], reward: -1.0, achieved: false }];
        let mut buf = Vec::new();
        write_trajectory_csv(&steps, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,s0,s1,a0,reward,achieved\n0,0.5,-1,1,-1,0\n");
    }
}
