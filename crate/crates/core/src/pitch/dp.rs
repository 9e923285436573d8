use super::candidates::Candidate;
use super::{PitchConfig, PitchTrack};

/// Chosen state per frame (`None` = unvoiced) and the total path cost.
#[derive(Clone, Debug, PartialEq)]
pub struct DpPath {
    pub states: Vec<Option<usize>>,
    pub cost: f64,
}

/// Cost of a frame state. Voiced: `1 − nccf·(1 − lag_weight·lag/max_lag)`.
pub fn local_cost(cand: Option<&Candidate>, max_lag: f64, cfg: &PitchConfig) -> f64 {
    match cand {
        None => cfg.unvoiced_local_cost,
        Some(c) => 1.0 - c.nccf * (1.0 - cfg.lag_weight * c.lag / max_lag),
    }
}

/// Cost of moving between consecutive frame states.
pub fn transition_cost(prev: Option<&Candidate>, cur: Option<&Candidate>, cfg: &PitchConfig) -> f64 {
    match (prev, cur) {
        (None, None) => 0.0,
        (Some(a), Some(b)) => cfg.freq_jump_weight * (a.lag / b.lag).ln().abs(),
        _ => cfg.vuv_transition_cost,
    }
}

fn state(f: &[Candidate], s: usize) -> Option<&Candidate> {
    if s == 0 {
        None
    } else {
        Some(&f[s - 1])
    }
}

/// Viterbi over {unvoiced} ∪ candidates. Ties keep the earliest state,
/// with unvoiced ordered before the candidates.
pub fn dp_path(cands: &[Vec<Candidate>], sample_rate: u32, cfg: &PitchConfig) -> DpPath {
    let max_lag = cfg.max_lag(sample_rate) as f64;
    if cands.is_empty() {
        return DpPath {
            states: Vec::new(),
            cost: 0.0,
        };
    }
    let mut cost: Vec<f64> = (0..=cands[0].len())
        .map(|s| local_cost(state(&cands[0], s), max_lag, cfg))
        .collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; cost.len()]];
    for t in 1..cands.len() {
        let (prev, cur) = (&cands[t - 1], &cands[t]);
        let mut next = Vec::with_capacity(cur.len() + 1);
        let mut bp = Vec::with_capacity(cur.len() + 1);
        for s in 0..=cur.len() {
            let c = state(cur, s);
            let mut best = (0usize, f64::INFINITY);
            for (p, &pc) in cost.iter().enumerate() {
                let v = pc + transition_cost(state(prev, p), c, cfg);
                if v < best.1 {
                    best = (p, v);
                }
            }
            next.push(best.1 + local_cost(c, max_lag, cfg));
            bp.push(best.0);
        }
        cost = next;
        back.push(bp);
    }
    let mut s = 0;
    for (i, &c) in cost.iter().enumerate() {
        if c < cost[s] {
            s = i;
        }
    }
    let total = cost[s];
    let mut states = vec![None; cands.len()];
    for t in (0..cands.len()).rev() {
        states[t] = if s == 0 { None } else { Some(s - 1) };
        s = back[t][s];
    }
    DpPath { states, cost: total }
}

/// Runs the DP and converts the chosen lags to f0.
pub fn dp_track(cands: &[Vec<Candidate>], sample_rate: u32, cfg: &PitchConfig) -> PitchTrack {
    let path = dp_path(cands, sample_rate, cfg);
    let mut track = PitchTrack::unvoiced(cands.len(), cfg.hop_s);
    for (t, s) in path.states.iter().enumerate() {
        if let Some(k) = *s {
            track.f0_hz[t] = (sample_rate as f64 / cands[t][k].lag) as f32;
            track.voiced[t] = true;
        }
    }
    track
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(lag: f64, nccf: f64) -> Candidate {
        Candidate { lag, nccf }
    }

    #[test]
    fn empty_input() {
        let p = dp_path(&[], 24_000, &PitchConfig::default());
        assert!(p.states.is_empty());
    }

    #[test]
    fn isolated_weak_frame_stays_voiced() {
        let cfg = PitchConfig::default();
        let frames = vec![vec![c(160.0, 0.95)], vec![], vec![c(160.0, 0.95)]];
        let p = dp_path(&frames, 24_000, &cfg);
        // two switches cost more than one unvoiced-local penalty
        assert_eq!(p.states, vec![Some(0), None, Some(0)]);
        let frames = vec![vec![c(160.0, 0.95)], vec![c(160.0, 0.4)], vec![c(160.0, 0.95)]];
        let p = dp_path(&frames, 24_000, &cfg);
        assert_eq!(p.states, vec![Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn lag_weight_prefers_shorter_period() {
        let cfg = PitchConfig::default();
        let frames = vec![vec![c(320.0, 1.0), c(160.0, 1.0)]; 4];
        let t = dp_track(&frames, 24_000, &cfg);
        assert!(t.f0_hz.iter().all(|&f| (f - 150.0).abs() < 1e-3));
    }
}
