//! Line lifetimes and Kaplan-Meier survival curves.

use thiserror::Error;

use crate::gitbridge::LineFate;
use crate::ingest::Category;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurvivalError {
    #[error("cannot estimate a survival curve from an empty cohort")]
    EmptyCohort,
    #[error("invalid duration {0}")]
    InvalidDuration(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationSample {
    /// Days from birth to death (or to the analysis horizon when censored).
    pub duration: f64,
    /// `true` when the death was observed.
    pub event: bool,
    pub influenced: bool,
    pub category: Category,
}

/// Samples plus the number of durations clamped to zero because the death
/// (or horizon) preceded the birth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<DurationSample>,
    pub clamped: usize,
}

/// Duration in days and whether the raw value was negative.
pub fn fate_duration(fate: &LineFate) -> (f64, bool) {
    let end = match (fate.censored, fate.death_time) {
        (false, Some(d)) => d,
        _ => fate.horizon_time,
    };
    let raw = end - fate.birth_time;
    if raw < 0 {
        (0.0, true)
    } else {
        (raw as f64 / SECONDS_PER_DAY, false)
    }
}

/// Turn fates into duration samples; `labels` gives each fate's
/// `(influenced, category)`.
pub fn build_samples<'a, I>(fates: I) -> SampleSet
where
    I: IntoIterator<Item = (&'a LineFate, bool, Category)>,
{
    let mut set = SampleSet::default();
    for (fate, influenced, category) in fates {
        let (duration, clamped) = fate_duration(fate);
        if clamped {
            set.clamped += 1;
        }
        set.samples.push(DurationSample {
            duration,
            event: !fate.censored,
            influenced,
            category,
        });
    }
    set
}

/// Product-limit estimate at the distinct event times.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub survival: Vec<f64>,
    pub censored: usize,
    pub total: usize,
}

impl SurvivalCurve {
    /// Ŝ(t), right-continuous; 1 before the first event.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&ti| ti <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Kaplan-Meier estimator. Censorings tied with events leave the risk set
/// after those events.
pub fn kaplan_meier<'a, I>(samples: I) -> Result<SurvivalCurve, SurvivalError>
where
    I: IntoIterator<Item = &'a DurationSample>,
{
    let mut obs: Vec<(f64, bool)> = samples.into_iter().map(|s| (s.duration, s.event)).collect();
    kaplan_meier_raw(&mut obs)
}

/// Kaplan-Meier over `(duration, event)` pairs; sorts `obs` in place.
pub fn kaplan_meier_raw(obs: &mut [(f64, bool)]) -> Result<SurvivalCurve, SurvivalError> {
    if obs.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    if let Some((d, _)) = obs.iter().find(|(d, _)| !d.is_finite() || *d < 0.0) {
        return Err(SurvivalError::InvalidDuration(d.to_string()));
    }
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let total = obs.len();
    let mut curve = SurvivalCurve {
        times: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        survival: Vec::new(),
        censored: 0,
        total,
    };
    // Between censorings the product telescopes to a ratio of risk-set
    // sizes; computing it that way keeps uncensored stretches exact.
    let mut s = 1.0;
    let mut base = 1.0;
    let mut block_n = total;
    let mut block_left = total;
    let mut i = 0;
    while i < total {
        let t = obs[i].0;
        let at_risk = total - i;
        if at_risk != block_left {
            base = s;
            block_n = at_risk;
        }
        let mut deaths = 0;
        let mut j = i;
        while j < total && obs[j].0 == t {
            if obs[j].1 {
                deaths += 1;
            } else {
                curve.censored += 1;
            }
            j += 1;
        }
        block_left = at_risk - deaths;
        if deaths > 0 {
            s = base * ((at_risk - deaths) as f64 / block_n as f64);
            curve.times.push(t);
            curve.at_risk.push(at_risk);
            curve.events.push(deaths);
            curve.survival.push(s);
        }
        i = j;
    }
    Ok(curve)
}

/// Smallest event time with Ŝ ≤ 0.5, if the curve gets there.
pub fn median_survival(curve: &SurvivalCurve) -> Option<f64> {
    curve
        .times
        .iter()
        .zip(&curve.survival)
        .find(|(_, &s)| s <= 0.5)
        .map(|(&t, _)| t)
}

/// Step-function points. Without a grid: `(0, 1)` followed by every event
/// time with the estimate just after it.
pub fn curve_points(curve: &SurvivalCurve, grid: Option<&[f64]>) -> Vec<(f64, f64)> {
    match grid {
        Some(ts) => ts.iter().map(|&t| (t, curve.at(t))).collect(),
        None => {
            let mut pts = Vec::with_capacity(curve.times.len() + 1);
            if curve.times.first().is_none_or(|&t| t > 0.0) {
                pts.push((0.0, 1.0));
            }
            pts.extend(curve.times.iter().copied().zip(curve.survival.iter().copied()));
            pts
        }
    }
}
