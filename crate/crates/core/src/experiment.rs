//! Monte Carlo experiment drivers and their reports.
//!
//! Every experiment is a pure function of its config (including the seed):
//! trials are distributed across workers with per-trial derived streams, so
//! aggregation is order-independent and rerunning an echoed config reproduces
//! every aggregate except `wall_time` bit for bit. Reports carry the per-trial
//! records; aggregates are recomputable from them and [`ExperimentReport::validate`]
//! checks exactly that on load.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    capture_from_alice, eliminate_evidence, live_relay, replay_attack, AdversaryStrategy,
    BasisPolicy, SessionEvidence,
};
use crate::error::{Error, Result};
use crate::keyspace::{Key, KeySpace, DEFAULT_ENUMERATION_CAP};
use crate::protocol::{run_session, Outcome, SessionParams};
use crate::rng::{labels, substream_seed, Rng};
use crate::stats;

pub const SCHEMA_VERSION: u32 = 1;

/// Sub-stream labels private to the experiment layer. Session labels live
/// above the 32-bit line so they can never collide with party/key labels.
mod exp_labels {
    pub const EQUAL_BATCH: u64 = 1;
    pub const UNEQUAL_BATCH: u64 = 2;
    pub const CAPTURE: u64 = 3;
    pub const VERIFIER: u64 = 4;
    pub const RELAY: u64 = 5;
    pub const SESSION_BASE: u64 = 1 << 32;
}

/// Config echo for an honest-run experiment. An optional interception policy
/// turns the equal-key batch into an eavesdropper-disturbance measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HonestConfig {
    pub params: SessionParams,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<BasisPolicy>,
}

/// Config echo for a key-space reduction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub params: SessionParams,
    pub policy: BasisPolicy,
    /// Intercepted sessions per trial, intersected in order.
    pub sessions: u32,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub keylen_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

/// Config echo for a replay/relay forgery experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub params: SessionParams,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Honest(HonestConfig),
    Attack(AttackConfig),
    Replay(ReplayConfig),
}

/// One attack trial: a fresh true key, `sessions` intercepted sessions,
/// elimination per session and running intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrial {
    pub true_key_hex: String,
    /// Bob's accept (1) / reject (0) per intercepted session.
    pub session_accepts: Vec<u8>,
    /// Survivor count of each single session's elimination.
    pub session_survivors: Vec<u64>,
    /// Survivor count after intersecting sessions 1..=s.
    pub cumulative_survivors: Vec<u64>,
    /// True key contained in every survivor set and every intersection.
    pub true_key_contained: bool,
}

/// Per-trial records, shaped per experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "records", rename_all = "snake_case")]
pub enum TrialData {
    Honest {
        equal_accepts: Vec<u8>,
        unequal_accepts: Vec<u8>,
    },
    Attack {
        trials: Vec<AttackTrial>,
    },
    Replay {
        stored_accepts: Vec<u8>,
        live_relay_accepts: Vec<u8>,
    },
}

/// Aggregate statistics. Which fields are present depends on the experiment;
/// every present field is recomputable from the per-trial records except
/// `wall_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_accept_rate: Option<f64>,
    /// Mean over trials of |S| / |K| after all intersections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_survival_fraction: Option<f64>,
    /// Mean over trials of the survivor fraction among the |K| - 1 non-true
    /// candidates; expectation is exactly (3/4)^(d * sessions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_nontrue_survival_fraction: Option<f64>,
    /// Standard error of the headline statistic: the nontrue survival mean
    /// for attacks, the accept rate otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Multiplicative shrink of the mean cumulative survival fraction per
    /// additional session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_session_factors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_key_containment_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live_relay_accept_rate: Option<f64>,
    /// Seconds; the one aggregate that is not reproducible.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub trials: TrialData,
    pub aggregates: Aggregates,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<ExperimentReport, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Recompute every aggregate from the per-trial records (wall_time is
    /// copied through).
    pub fn recompute_aggregates(&self) -> Aggregates {
        let mut agg = match (&self.config, &self.trials) {
            (ExperimentConfig::Honest(_), TrialData::Honest { equal_accepts, unequal_accepts }) => {
                honest_aggregates(equal_accepts, unequal_accepts)
            }
            (ExperimentConfig::Attack(cfg), TrialData::Attack { trials }) => {
                attack_aggregates(cfg, trials)
            }
            (ExperimentConfig::Replay(_), TrialData::Replay { stored_accepts, live_relay_accepts }) => {
                replay_aggregates(stored_accepts, live_relay_accepts)
            }
            _ => Aggregates::default(),
        };
        agg.wall_time = self.aggregates.wall_time;
        agg
    }

    /// Self-consistency check run on load: stored aggregates must equal the
    /// recomputation from per-trial records.
    pub fn validate(&self) -> Result<()> {
        let recomputed = self.recompute_aggregates();
        if recomputed != self.aggregates {
            return Err(Error::InvalidParams(
                "report aggregates do not match their per-trial records".into(),
            ));
        }
        Ok(())
    }

    /// Flat CSV of the per-trial records; columns are fixed per experiment:
    ///
    /// * honest: `trial,batch,accepted`
    /// * attack: `trial,session,accepted,survivors,cumulative_survivors,true_key_contained`
    /// * replay: `trial,kind,accepted`
    pub fn to_csv(&self) -> String {
        match &self.trials {
            TrialData::Honest { equal_accepts, unequal_accepts } => {
                let mut out = String::from("trial,batch,accepted\n");
                for (i, a) in equal_accepts.iter().enumerate() {
                    out.push_str(&format!("{i},equal,{a}\n"));
                }
                for (i, a) in unequal_accepts.iter().enumerate() {
                    out.push_str(&format!("{i},unequal,{a}\n"));
                }
                out
            }
            TrialData::Attack { trials } => {
                let mut out =
                    String::from("trial,session,accepted,survivors,cumulative_survivors,true_key_contained\n");
                for (t, trial) in trials.iter().enumerate() {
                    for s in 0..trial.session_accepts.len() {
                        out.push_str(&format!(
                            "{t},{s},{},{},{},{}\n",
                            trial.session_accepts[s],
                            trial.session_survivors[s],
                            trial.cumulative_survivors[s],
                            trial.true_key_contained as u8,
                        ));
                    }
                }
                out
            }
            TrialData::Replay { stored_accepts, live_relay_accepts } => {
                let mut out = String::from("trial,kind,accepted\n");
                for (i, a) in stored_accepts.iter().enumerate() {
                    out.push_str(&format!("{i},stored_replay,{a}\n"));
                }
                for (i, a) in live_relay_accepts.iter().enumerate() {
                    out.push_str(&format!("{i},live_relay,{a}\n"));
                }
                out
            }
        }
    }
}

fn honest_aggregates(equal: &[u8], unequal: &[u8]) -> Aggregates {
    let accept_rate = stats::rate(equal);
    Aggregates {
        accept_rate: Some(accept_rate),
        false_accept_rate: Some(stats::rate(unequal)),
        std_error: Some(stats::binomial_sigma(accept_rate, equal.len().max(1) as u64)),
        ..Aggregates::default()
    }
}

fn attack_aggregates(cfg: &AttackConfig, trials: &[AttackTrial]) -> Aggregates {
    let total = (1u64 << cfg.params.key_len) as f64;
    let final_fracs: Vec<f64> = trials
        .iter()
        .map(|t| *t.cumulative_survivors.last().unwrap_or(&0) as f64 / total)
        .collect();
    let nontrue_fracs: Vec<f64> = trials
        .iter()
        .map(|t| {
            let survivors = *t.cumulative_survivors.last().unwrap_or(&0) as f64;
            let true_in = t.true_key_contained as u8 as f64;
            (survivors - true_in) / (total - 1.0)
        })
        .collect();
    let accepts: Vec<u8> = trials.iter().flat_map(|t| t.session_accepts.iter().copied()).collect();

    let sessions = cfg.sessions as usize;
    let mut factors = Vec::with_capacity(sessions);
    let mut prev = 1.0f64;
    for s in 0..sessions {
        let mean_frac = stats::mean(
            &trials
                .iter()
                .map(|t| t.cumulative_survivors[s] as f64 / total)
                .collect::<Vec<_>>(),
        );
        factors.push(mean_frac / prev);
        prev = mean_frac;
    }

    let contained = trials.iter().filter(|t| t.true_key_contained).count() as f64;
    Aggregates {
        accept_rate: Some(stats::rate(&accepts)),
        mean_survival_fraction: Some(stats::mean(&final_fracs)),
        mean_nontrue_survival_fraction: Some(stats::mean(&nontrue_fracs)),
        std_error: Some(stats::standard_error(&nontrue_fracs)),
        per_session_factors: Some(factors),
        true_key_containment_rate: Some(contained / trials.len().max(1) as f64),
        ..Aggregates::default()
    }
}

fn replay_aggregates(stored: &[u8], live: &[u8]) -> Aggregates {
    let accept_rate = stats::rate(stored);
    Aggregates {
        accept_rate: Some(accept_rate),
        live_relay_accept_rate: Some(stats::rate(live)),
        std_error: Some(stats::binomial_sigma(accept_rate, stored.len().max(1) as u64)),
        ..Aggregates::default()
    }
}

fn random_distinct_key(rng: &mut Rng, len: usize, not: &Key) -> Key {
    loop {
        let k = Key::random(rng, len);
        if &k != not {
            return k;
        }
    }
}

/// Honest-run statistics: an equal-key batch (optionally under passive
/// interception) and a random-unequal-key batch.
pub fn run_honest(cfg: &HonestConfig) -> Result<ExperimentReport> {
    cfg.params.validate()?;
    if let Some(policy) = &cfg.policy {
        policy.check_len(cfg.params.d)?;
    }
    let start = std::time::Instant::now();

    let equal_root = substream_seed(cfg.seed, exp_labels::EQUAL_BATCH);
    let adversary = cfg.policy.clone().map(AdversaryStrategy::InterceptMeasure);
    let equal_accepts: Vec<u8> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial_root = substream_seed(equal_root, t);
            let mut key_rng = Rng::stream(trial_root, labels::KEY);
            let key = Key::random(&mut key_rng, cfg.params.key_len);
            let transcript = run_session(
                &key,
                &key,
                &cfg.params,
                adversary.as_ref(),
                substream_seed(trial_root, exp_labels::SESSION_BASE),
                t,
            )?;
            Ok((transcript.outcome == Some(Outcome::Accept)) as u8)
        })
        .collect::<Result<_>>()?;

    let unequal_root = substream_seed(cfg.seed, exp_labels::UNEQUAL_BATCH);
    let unequal_accepts: Vec<u8> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial_root = substream_seed(unequal_root, t);
            let mut key_rng = Rng::stream(trial_root, labels::KEY);
            let alice_key = Key::random(&mut key_rng, cfg.params.key_len);
            let bob_key = random_distinct_key(&mut key_rng, cfg.params.key_len, &alice_key);
            let transcript = run_session(
                &alice_key,
                &bob_key,
                &cfg.params,
                None,
                substream_seed(trial_root, exp_labels::SESSION_BASE),
                t,
            )?;
            Ok((transcript.outcome == Some(Outcome::Accept)) as u8)
        })
        .collect::<Result<_>>()?;

    let mut aggregates = honest_aggregates(&equal_accepts, &unequal_accepts);
    aggregates.wall_time = start.elapsed().as_secs_f64();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: ExperimentConfig::Honest(cfg.clone()),
        trials: TrialData::Honest { equal_accepts, unequal_accepts },
        aggregates,
    })
}

/// Key-space reduction experiment: per trial, run `sessions` intercepted
/// sessions with a fresh true key, eliminate per session, intersect, and
/// record survivor counts and true-key containment.
pub fn run_attack(cfg: &AttackConfig) -> Result<ExperimentReport> {
    cfg.params.validate()?;
    cfg.policy.check_len(cfg.params.d)?;
    if cfg.sessions < 1 {
        return Err(Error::InvalidParams("attack needs at least one session".into()));
    }
    let keyspace = KeySpace::exhaustive_with_cap(cfg.params.key_len, cfg.keylen_cap);
    keyspace.ensure_enumerable()?;
    let start = std::time::Instant::now();

    let trials: Vec<AttackTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial_root = substream_seed(cfg.seed, t);
            let mut key_rng = Rng::stream(trial_root, labels::KEY);
            let true_key = Key::random(&mut key_rng, cfg.params.key_len);
            let adversary = AdversaryStrategy::InterceptMeasure(cfg.policy.clone());

            let mut session_accepts = Vec::with_capacity(cfg.sessions as usize);
            let mut session_survivors = Vec::with_capacity(cfg.sessions as usize);
            let mut cumulative_survivors = Vec::with_capacity(cfg.sessions as usize);
            let mut contained = true;
            let mut running: Option<crate::keyspace::SurvivorSet> = None;

            for s in 0..cfg.sessions as u64 {
                let transcript = run_session(
                    &true_key,
                    &true_key,
                    &cfg.params,
                    Some(&adversary),
                    substream_seed(trial_root, exp_labels::SESSION_BASE + s),
                    s,
                )?;
                session_accepts.push((transcript.outcome == Some(Outcome::Accept)) as u8);
                let evidence = SessionEvidence::from_transcript(&transcript);
                let survivors = eliminate_evidence(&keyspace, &evidence)?;
                contained &= survivors.contains(&true_key);
                session_survivors.push(survivors.survivor_count() as u64);
                running = Some(match running {
                    None => survivors,
                    Some(acc) => acc.intersect(&survivors)?,
                });
                let acc = running.as_ref().unwrap();
                contained &= acc.contains(&true_key);
                cumulative_survivors.push(acc.survivor_count() as u64);
            }

            Ok(AttackTrial {
                true_key_hex: true_key.to_hex(),
                session_accepts,
                session_survivors,
                cumulative_survivors,
                true_key_contained: contained,
            })
        })
        .collect::<Result<_>>()?;

    let mut aggregates = attack_aggregates(cfg, &trials);
    aggregates.wall_time = start.elapsed().as_secs_f64();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: ExperimentConfig::Attack(cfg.clone()),
        trials: TrialData::Attack { trials },
        aggregates,
    })
}

/// Forgery experiment: per trial, capture a transmission from Alice with
/// quantum memory and replay it at a fresh verifier sharing her key; also run
/// a live relayed session.
pub fn run_replay(cfg: &ReplayConfig) -> Result<ExperimentReport> {
    cfg.params.validate()?;
    let start = std::time::Instant::now();

    let results: Vec<(u8, u8)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trial_root = substream_seed(cfg.seed, t);
            let mut key_rng = Rng::stream(trial_root, labels::KEY);
            let key = Key::random(&mut key_rng, cfg.params.key_len);

            let mut capture_rng = Rng::stream(trial_root, exp_labels::CAPTURE);
            let stored = capture_from_alice(&key, &cfg.params, &mut capture_rng)?;
            let mut verifier_rng = Rng::stream(trial_root, exp_labels::VERIFIER);
            let stored_outcome = replay_attack(stored, &key, &mut verifier_rng)?;

            let relay_outcome = live_relay(
                &key,
                &key,
                &cfg.params,
                substream_seed(trial_root, exp_labels::RELAY),
                t,
            )?;
            Ok(((stored_outcome == Outcome::Accept) as u8, (relay_outcome == Outcome::Accept) as u8))
        })
        .collect::<Result<_>>()?;

    let stored_accepts: Vec<u8> = results.iter().map(|r| r.0).collect();
    let live_relay_accepts: Vec<u8> = results.iter().map(|r| r.1).collect();
    let mut aggregates = replay_aggregates(&stored_accepts, &live_relay_accepts);
    aggregates.wall_time = start.elapsed().as_secs_f64();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: ExperimentConfig::Replay(cfg.clone()),
        trials: TrialData::Replay { stored_accepts, live_relay_accepts },
        aggregates,
    })
}
