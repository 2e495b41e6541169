//! Per-episode metrics rows, written as RFC-4180 CSV with a header row and
//! LF line endings.

use serde::Serialize;

use ringlearn_core::learning::EpisodeTrace;

/// One metrics row. Contribution columns are fixed-width (config slots) so
/// the header stays stable while the network grows; slots beyond the current
/// subnetwork count hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub condition_id: String,
    pub mean_return: f64,
    pub min_return: f64,
    pub value_pred: f64,
    pub value_band_lo: f64,
    pub active_subnetwork: usize,
    pub n_subnets: usize,
    pub primary_contrib: Vec<f64>,
    pub supplementary_contrib: Vec<f64>,
    pub grew: u8,
}

impl MetricsRow {
    pub fn header(slots: usize) -> Vec<String> {
        let mut h = vec![
            "episode".to_string(),
            "condition_id".to_string(),
            "mean_return".to_string(),
            "min_return".to_string(),
            "value_pred".to_string(),
            "value_band_lo".to_string(),
            "active_subnetwork".to_string(),
            "n_subnets".to_string(),
        ];
        for s in 0..slots {
            h.push(format!("primary_contrib_{s}"));
        }
        for s in 0..slots {
            h.push(format!("supplementary_contrib_{s}"));
        }
        h.push("grew".to_string());
        h
    }

    pub fn record(&self, slots: usize) -> Vec<String> {
        let mut r = vec![
            self.episode.to_string(),
            self.condition_id.clone(),
            self.mean_return.to_string(),
            self.min_return.to_string(),
            self.value_pred.to_string(),
            self.value_band_lo.to_string(),
            self.active_subnetwork.to_string(),
            self.n_subnets.to_string(),
        ];
        for s in 0..slots {
            r.push(self.primary_contrib.get(s).copied().unwrap_or(0.0).to_string());
        }
        for s in 0..slots {
            r.push(
                self.supplementary_contrib
                    .get(s)
                    .copied()
                    .unwrap_or(0.0)
                    .to_string(),
            );
        }
        r.push(self.grew.to_string());
        r
    }
}

/// Summary statistics of one episode trace used to fill a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStats {
    pub mean_return: f64,
    pub min_return: f64,
    pub mean_value_pred: f64,
    pub mean_band_lo: f64,
}

pub fn trace_stats(trace: &EpisodeTrace, horizon: usize) -> TraceStats {
    let n = trace.returns.len() as f64;
    let mean_return = trace.returns.iter().sum::<f64>() / n;
    let min_return = trace
        .returns
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let preds: Vec<f64> = (0..trace.len())
        .map(|t| trace.predicted_return(t, horizon))
        .collect();
    let mean_value_pred = preds.iter().sum::<f64>() / n;
    let mean_band_lo = preds
        .iter()
        .enumerate()
        .map(|(t, p)| p - trace.value_band(t))
        .sum::<f64>()
        / n;
    TraceStats {
        mean_return,
        min_return,
        mean_value_pred,
        mean_band_lo,
    }
}

/// Episode-mean basis vector, the aggregate the contribution columns use.
pub fn mean_basis(trace: &EpisodeTrace) -> Vec<f64> {
    let n_c = trace.states[0].b.len();
    let mut acc = vec![0.0; n_c];
    for s in &trace.states {
        for k in 0..n_c {
            acc[k] += s.b[k];
        }
    }
    acc.iter_mut().for_each(|v| *v /= trace.len() as f64);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_record_align() {
        let row = MetricsRow {
            episode: 3,
            condition_id: "flat".into(),
            mean_return: 1.5,
            min_return: 0.2,
            value_pred: 1.1,
            value_band_lo: 0.4,
            active_subnetwork: 0,
            n_subnets: 1,
            primary_contrib: vec![1.0],
            supplementary_contrib: vec![1.0],
            grew: 0,
        };
        let h = MetricsRow::header(4);
        let r = row.record(4);
        assert_eq!(h.len(), r.len());
        assert_eq!(r[0], "3");
        assert_eq!(r[8], "1");
        assert_eq!(r[9], "0");
    }
}
