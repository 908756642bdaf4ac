//! Random search over mixed continuous, integer and categorical spaces.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// A sampled or categorical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Str(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSpec {
    /// Uniform on `[lo, hi]`.
    Linear {
        lo: f64,
        hi: f64,
    },
    /// Uniform exponent on `[log10 lo, log10 hi]`.
    Log {
        lo: f64,
        hi: f64,
    },
    /// Uniform integer on `[lo, hi]`.
    Integer {
        lo: i64,
        hi: i64,
    },
    Categorical {
        values: Vec<Value>,
    },
}

pub type Config = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: BTreeMap<String, ParamSpec>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, spec: ParamSpec) -> Self {
        self.params.insert(name.to_string(), spec);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        for (name, p) in &self.params {
            let ok = match p {
                ParamSpec::Linear { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
                ParamSpec::Log { lo, hi } => *lo > 0.0 && hi.is_finite() && lo <= hi,
                ParamSpec::Integer { lo, hi } => lo <= hi,
                ParamSpec::Categorical { values } => !values.is_empty(),
            };
            if !ok {
                return Err(Error::Config(format!("invalid range for parameter {name}")));
            }
        }
        Ok(())
    }

    /// Transformer architecture and optimizer settings.
    pub fn transformer() -> Self {
        let cat = |v: &[i64]| ParamSpec::Categorical {
            values: v.iter().map(|x| Value::Int(*x)).collect(),
        };
        Self::new()
            .with("embed_dim", cat(&[16, 32, 64]))
            .with("heads", cat(&[1, 2, 4]))
            .with("blocks", ParamSpec::Integer { lo: 1, hi: 3 })
            .with("ffn_dim", cat(&[32, 64, 128]))
            .with("lr", ParamSpec::Log { lo: 1e-4, hi: 1e-2 })
            .with("dropout", ParamSpec::Linear { lo: 0.0, hi: 0.3 })
    }

    /// The six reservoir settings.
    pub fn reservoir() -> Self {
        Self::new()
            .with("leak", ParamSpec::Linear { lo: 0.05, hi: 1.0 })
            .with("ridge", ParamSpec::Log { lo: 1e-8, hi: 1.0 })
            .with("input_scale", ParamSpec::Linear { lo: 0.05, hi: 2.0 })
            .with("spectral_radius", ParamSpec::Linear { lo: 0.1, hi: 2.0 })
            .with("link_prob", ParamSpec::Linear { lo: 0.01, hi: 1.0 })
            .with("train_noise", ParamSpec::Log { lo: 1e-6, hi: 1e-1 })
    }
}

/// One configuration drawn from `space`. Each parameter uses its own stream
/// keyed by name, so adding a parameter leaves the others unchanged.
pub fn sample(space: &SearchSpace, seed: u64) -> Config {
    let mut out = Config::new();
    for (name, p) in &space.params {
        let mut rng = seed::rng(seed::derive(seed, name));
        let v = match p {
            ParamSpec::Linear { lo, hi } => Value::Float(lo + (hi - lo) * rng.random::<f64>()),
            ParamSpec::Log { lo, hi } => {
                let (a, b) = (lo.log10(), hi.log10());
                Value::Float(10f64.powf(a + (b - a) * rng.random::<f64>()))
            }
            ParamSpec::Integer { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
            ParamSpec::Categorical { values } => values[rng.random_range(0..values.len())].clone(),
        };
        out.insert(name.clone(), v);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub config: Config,
    /// `None` when the objective failed.
    pub objective: Option<f64>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: TrialRecord,
    pub history: Vec<TrialRecord>,
}

/// Evaluates `trials` independent samples and returns the lowest successful
/// objective. A trial fails when the objective errors or is not finite.
pub fn random_search<F>(space: &SearchSpace, trials: usize, mut objective: F, seed: u64) -> Result<SearchResult>
where
    F: FnMut(&Config, u64) -> Result<f64>,
{
    space.validate()?;
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let mut history = Vec::with_capacity(trials);
    for index in 0..trials {
        let trial_seed = seed::derive_index(seed, index as u64);
        let config = sample(space, trial_seed);
        let t0 = Instant::now();
        let res = objective(&config, trial_seed);
        let wall_time_s = t0.elapsed().as_secs_f64();
        let (objective, error) = match res {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        history.push(TrialRecord {
            index,
            seed: trial_seed,
            config,
            objective,
            error,
            wall_time_s,
        });
    }
    let best = history
        .iter()
        .filter(|t| t.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
        .cloned()
        .ok_or(Error::SearchExhausted { trials })?;
    Ok(SearchResult { best, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(c: &Config, k: &str) -> f64 {
        c[k].as_f64().unwrap()
    }

    #[test]
    fn singleton_and_determinism() {
        let s = SearchSpace::new()
            .with(
                "n",
                ParamSpec::Categorical {
                    values: vec![Value::Int(4)],
                },
            )
            .with("x", ParamSpec::Linear { lo: -1.0, hi: 1.0 });
        for seed in 0..20 {
            assert_eq!(sample(&s, seed)["n"], Value::Int(4));
            assert_eq!(sample(&s, seed), sample(&s, seed));
        }
    }

    #[test]
    fn log_exponents_are_uniform() {
        let s = SearchSpace::new().with("b", ParamSpec::Log { lo: 1e-6, hi: 1e-2 });
        let mut buckets = [0usize; 8];
        let n = 10_000;
        for i in 0..n {
            let e = f(&sample(&s, seed::derive_index(5, i)), "b").log10();
            assert!((-6.0..=-2.0).contains(&e));
            buckets[(((e + 6.0) / 4.0 * 8.0) as usize).min(7)] += 1;
        }
        // KS-style bound on the empirical CDF at bucket edges
        let mut cum = 0.0;
        for (k, b) in buckets.iter().enumerate() {
            cum += *b as f64 / n as f64;
            assert!((cum - (k + 1) as f64 / 8.0).abs() < 0.02, "{buckets:?}");
        }
    }

    #[test]
    fn integers_cover_range() {
        let s = SearchSpace::new().with("k", ParamSpec::Integer { lo: 2, hi: 4 });
        let seen: std::collections::BTreeSet<_> = (0..200)
            .map(|i| match &sample(&s, i)["k"] {
                Value::Int(v) => *v,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn quadratic_bowl_is_found() {
        let s = SearchSpace::new().with("x", ParamSpec::Linear { lo: -2.0, hi: 3.0 });
        for seed in 0..10 {
            let r = random_search(&s, 200, |c, _| Ok(1.0 + (f(c, "x") - 0.7).powi(2)), seed).unwrap();
            assert!(r.best.objective.unwrap() <= 1.05);
            assert_eq!(r.history.len(), 200);
        }
    }

    #[test]
    fn failures_are_excluded() {
        let s = SearchSpace::new().with("x", ParamSpec::Linear { lo: 0.0, hi: 1.0 });
        let mut i = 0;
        let r = random_search(
            &s,
            30,
            |c, _| {
                i += 1;
                if i % 2 == 0 {
                    Err(Error::Invalid("odd trial".into()))
                } else {
                    Ok(f(c, "x"))
                }
            },
            1,
        )
        .unwrap();
        assert_eq!(r.best.index % 2, 0);
        let min = r
            .history
            .iter()
            .filter_map(|t| t.objective)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.objective, Some(min));
        assert!(matches!(
            random_search(&s, 5, |_, _| Ok(f64::NAN), 1),
            Err(Error::SearchExhausted { trials: 5 })
        ));
        let one = random_search(&s, 1, |c, _| Ok(f(c, "x")), 3).unwrap();
        assert_eq!(one.best, one.history[0]);
    }

    #[test]
    fn best_is_monotone_in_trials() {
        let s = SearchSpace::reservoir();
        let obj = |c: &Config, _| Ok((f(c, "leak") - 0.3).powi(2) + f(c, "ridge").log10().powi(2) / 100.0);
        let mut prev = f64::INFINITY;
        for n in [1, 5, 20, 50] {
            let b = random_search(&s, n, obj, 9).unwrap().best.objective.unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn space_toml_roundtrip_and_validation() {
        let s = SearchSpace::transformer();
        let text = toml::to_string(&s).unwrap();
        let back: SearchSpace = toml::from_str(&text).unwrap();
        assert_eq!(s, back);
        assert!(SearchSpace::new().validate().is_err());
        assert!(SearchSpace::new()
            .with("b", ParamSpec::Log { lo: 0.0, hi: 1.0 })
            .validate()
            .is_err());
    }
}
