//! Resumable solves driven by externally supplied answers.
//!
//! The state holds nothing but the configuration and the answer cache. Every
//! call to [`EngineState::advance`] replays the search from scratch against
//! the cache and stops at the first vertex whose answer is missing, so equal
//! answer sequences always produce equal states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::oracle::{choose_label, CoverOracle, Mode};
use super::search::{check_shape, search_at, AnswerSource, RainbowCell, SearchOutcome, SolveOptions, Strategy};
use crate::error::{Error, Result};
use crate::simplex::{grid_diameter, BarycentricPoint, GridVertex};

pub const ENGINE_STATE_SCHEMA: &str = "engine_state.v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub id: u64,
    pub cover: usize,
    pub vertex: GridVertex,
    pub point: BarycentricPoint,
    pub answered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsweredQuery {
    pub cover: usize,
    pub vertex: GridVertex,
    pub answer: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub schema: String,
    pub k: usize,
    pub covers: usize,
    pub mode: Mode,
    pub strategy: Strategy,
    pub tolerance: f64,
    /// Resolutions still to be tried, finest last.
    pub resolutions: Vec<u32>,
    pub resolution: u32,
    /// Answers at the current resolution, keyed `"j:a_1,…,a_k"`.
    pub answers: BTreeMap<String, Vec<usize>>,
    pub pending: Vec<PendingQuery>,
    pub answered: BTreeMap<u64, AnsweredQuery>,
    pub next_query_id: u64,
    pub status: SolveStatus,
    pub result: Option<RainbowCell>,
    pub failure: Option<String>,
}

pub fn answer_key(cover: usize, v: &GridVertex) -> String {
    format!("{cover}:{}", v.key())
}

struct CacheSource<'a> {
    answers: &'a BTreeMap<String, Vec<usize>>,
}

impl AnswerSource for CacheSource<'_> {
    fn answer(&mut self, cover: usize, v: &GridVertex) -> Result<Option<Vec<usize>>> {
        Ok(self.answers.get(&answer_key(cover, v)).cloned())
    }
}

impl EngineState {
    pub fn new(k: usize, covers: usize, mode: Mode, opts: &SolveOptions) -> Result<Self> {
        check_shape(k, covers)?;
        if !(opts.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        let resolutions = opts.schedule.admissible(k, opts.tolerance);
        let Some(&first) = resolutions.first() else {
            return Err(Error::ResolutionExceeded {
                max_resolution: opts.schedule.max(),
                diagnostics: format!(
                    "cell diameter {} at the finest resolution exceeds tolerance {}",
                    grid_diameter(k, opts.schedule.max()),
                    opts.tolerance
                ),
            });
        };
        let mut state = Self {
            schema: ENGINE_STATE_SCHEMA.into(),
            k,
            covers,
            mode,
            strategy: opts.strategy_for(mode),
            tolerance: opts.tolerance,
            resolutions,
            resolution: first,
            answers: BTreeMap::new(),
            pending: vec![],
            answered: BTreeMap::new(),
            next_query_id: 1,
            status: SolveStatus::Running,
            result: None,
            failure: None,
        };
        state.advance()?;
        Ok(state)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(s)?;
        if state.schema != ENGINE_STATE_SCHEMA {
            return Err(Error::Format(format!("unsupported schema {:?}", state.schema)));
        }
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("engine state serializes")
    }

    pub fn is_done(&self) -> bool {
        self.status != SolveStatus::Running
    }

    /// Unanswered queries blocking the search.
    pub fn next_pending(&self) -> &[PendingQuery] {
        &self.pending
    }

    /// Records an answer and advances the search. Re-supplying an identical
    /// answer is a no-op.
    pub fn supply_answer(&mut self, id: u64, answer: &[usize]) -> Result<()> {
        let mut answer = answer.to_vec();
        answer.sort_unstable();
        answer.dedup();
        if let Some(prev) = self.answered.get(&id) {
            return if prev.answer == answer {
                Ok(())
            } else {
                Err(Error::AnswerConflict(id))
            };
        }
        let Some(pos) = self.pending.iter().position(|q| q.id == id) else {
            return Err(Error::UnknownQueryId(id));
        };
        if answer.is_empty() || answer.iter().any(|&i| i >= self.k) {
            return Err(Error::AnswerShapeInvalid(format!(
                "answer must be a nonempty subset of 0..{}, got {answer:?}",
                self.k
            )));
        }
        let q = self.pending[pos].clone();
        if choose_label(self.mode, &q.vertex, &answer).is_none() {
            return Err(Error::AdmissibilityViolation {
                cover: q.cover,
                vertex: q.vertex,
                returned: answer,
            });
        }
        self.pending.remove(pos);
        self.answers.insert(answer_key(q.cover, &q.vertex), answer.clone());
        self.answered.insert(
            id,
            AnsweredQuery {
                cover: q.cover,
                vertex: q.vertex,
                answer,
            },
        );
        if self.pending.is_empty() {
            self.advance()?;
        }
        Ok(())
    }

    /// Re-runs the search against the cache, moving to finer resolutions
    /// when the current one is exhausted.
    pub fn advance(&mut self) -> Result<()> {
        while self.status == SolveStatus::Running {
            let mut source = CacheSource {
                answers: &self.answers,
            };
            let outcome = search_at(
                self.k,
                self.covers,
                self.mode,
                self.strategy,
                self.resolution,
                &mut source,
            )?;
            match outcome {
                SearchOutcome::Found(cell) => {
                    self.pending.clear();
                    self.result = Some(cell);
                    self.status = SolveStatus::Completed;
                }
                SearchOutcome::Pending(missing) => {
                    let previous = std::mem::take(&mut self.pending);
                    for (cover, vertex) in missing {
                        let id = previous
                            .iter()
                            .find(|q| q.cover == cover && q.vertex == vertex)
                            .map(|q| q.id)
                            .unwrap_or_else(|| {
                                let id = self.next_query_id;
                                self.next_query_id += 1;
                                id
                            });
                        self.pending.push(PendingQuery {
                            id,
                            cover,
                            point: vertex.point(),
                            vertex,
                            answered: false,
                        });
                    }
                    return Ok(());
                }
                SearchOutcome::Exhausted(why) => self.next_resolution(why),
            }
        }
        Ok(())
    }

    fn next_resolution(&mut self, why: String) {
        let Some(pos) = self.resolutions.iter().position(|&m| m > self.resolution) else {
            self.status = SolveStatus::Failed;
            self.failure = Some(why);
            return;
        };
        let next = self.resolutions[pos];
        let old = std::mem::take(&mut self.answers);
        for (key, answer) in old {
            let (cover, counts) = key.split_once(':').expect("answer keys are well formed");
            let v = GridVertex::parse_key(counts, self.resolution).expect("answer keys are well formed");
            if let Some(w) = v.rescaled(next) {
                self.answers.insert(format!("{cover}:{}", w.key()), answer);
            }
        }
        self.resolution = next;
    }

    /// The final cell, or the error a failed solve ended with.
    pub fn outcome(&self) -> Result<Option<&RainbowCell>> {
        match self.status {
            SolveStatus::Running => Ok(None),
            SolveStatus::Completed => Ok(self.result.as_ref()),
            SolveStatus::Failed => Err(Error::ResolutionExceeded {
                max_resolution: self.resolution,
                diagnostics: self.failure.clone().unwrap_or_default(),
            }),
        }
    }

    /// Answers every pending query from `oracle` until the solve ends.
    pub fn run_with<O: CoverOracle + ?Sized>(&mut self, oracle: &O) -> Result<RainbowCell> {
        while !self.is_done() {
            let batch: Vec<PendingQuery> = self.pending.clone();
            for q in batch {
                let answer = oracle.query_vertex(q.cover, &q.vertex);
                self.supply_answer(q.id, &answer)?;
            }
        }
        Ok(self.outcome()?.expect("completed").clone())
    }
}
