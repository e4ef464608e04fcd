//! Interactive fair-division sessions persisted as append-only NDJSON event
//! logs. A session's state is a pure function of its `created` event and the
//! answers that follow it, so replaying any prefix of the log yields a valid
//! state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineState, Mode, PendingQuery, Schedule, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::fair::{cake_result_from_cell, rent_result_from_cell, CakeAllocation, CakePartition, RentalResult};

pub const SESSION_SCHEMA: &str = "session.v1";
pub const EVENT_SCHEMA: &str = "session_event.v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    Cake,
    Rent,
}

/// What a session is created from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub kind: SessionKind,
    /// Player names; their count is the number of pieces or rooms.
    pub participants: Vec<String>,
    pub tolerance: f64,
    #[serde(default = "default_total_rent")]
    pub total_rent: f64,
    pub max_resolution: u32,
}

fn default_total_rent() -> f64 {
    1.0
}

impl SessionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.participants.len() < 2 {
            return Err(Error::InvalidArgument("need at least two participants".into()));
        }
        if !(self.tolerance > 0.0) || !(self.total_rent > 0.0) {
            return Err(Error::InvalidArgument("tolerance and total rent must be positive".into()));
        }
        Ok(())
    }

    fn engine(&self) -> Result<EngineState> {
        self.validate()?;
        let n = self.participants.len();
        let mode = match self.kind {
            SessionKind::Cake => Mode::Primal,
            SessionKind::Rent => Mode::Dual,
        };
        let opts = SolveOptions::new(self.tolerance).with_schedule(Schedule::doubling(8, self.max_resolution));
        EngineState::new(n, n, mode, &opts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventBody {
    Created { id: String, spec: SessionSpec },
    QueryIssued { query: PendingQuery },
    AnswerReceived { query_id: u64, answer: Vec<usize> },
    Completed { result: SessionResult },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub schema: String,
    pub seq: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SessionResult {
    Cake(CakeAllocation),
    Rent(RentalResult),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub query_id: u64,
    pub seq: u64,
    pub status: SolveStatus,
}

/// A pending query with its partition or rents spelled out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub id: u64,
    pub participant: usize,
    pub name: String,
    pub x: Vec<f64>,
    /// Cake pieces `[start, end]`, left to right.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rents: Option<Vec<f64>>,
    /// Rooms that cost nothing at these rents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_rooms: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub schema: String,
    pub id: String,
    pub kind: SessionKind,
    pub participants: Vec<String>,
    pub status: SolveStatus,
    pub resolution: u32,
    pub answered: usize,
    pub pending: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub struct Session {
    pub id: String,
    pub spec: SessionSpec,
    pub state: EngineState,
    path: PathBuf,
    file: Option<File>,
    seq: u64,
    acks: BTreeMap<u64, Acknowledgment>,
    issued: BTreeSet<u64>,
    completed_logged: bool,
}

pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.events.ndjson"))
}

pub fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Session {
    /// Starts a session and writes its first events.
    pub fn create(dir: &Path, id: &str, spec: SessionSpec) -> Result<Self> {
        if !valid_id(id) {
            return Err(Error::InvalidArgument(format!("bad session id {id:?}")));
        }
        let state = spec.engine()?;
        let path = log_path(dir, id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut s = Self {
            id: id.into(),
            spec: spec.clone(),
            state,
            path,
            file: Some(file),
            seq: 0,
            acks: BTreeMap::new(),
            issued: BTreeSet::new(),
            completed_logged: false,
        };
        s.append(EventBody::Created { id: id.into(), spec })?;
        s.after_change()?;
        Ok(s)
    }

    /// Rebuilds a session from its log, ignoring a torn final line.
    pub fn replay(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut events = vec![];
        // Byte length of the intact prefix: every complete, parseable line.
        let mut intact = 0;
        let mut offset = 0;
        let pieces: Vec<&[u8]> = bytes.split(|&c| c == b'\n').collect();
        for (i, raw) in pieces.iter().enumerate() {
            let last = i + 1 == pieces.len();
            let end = offset + raw.len() + usize::from(!last);
            let text = String::from_utf8_lossy(raw);
            if text.trim().is_empty() {
                if !last {
                    intact = end;
                }
                offset = end;
                continue;
            }
            // A final line without its newline was cut mid-write.
            if last {
                break;
            }
            match serde_json::from_str::<Event>(&text) {
                Ok(e) => {
                    events.push(e);
                    intact = end;
                }
                Err(_) if i + 2 == pieces.len() && pieces[i + 1].is_empty() => break,
                Err(e) => return Err(Error::Format(format!("{}: line {}: {e}", path.display(), i + 1))),
            }
            offset = end;
        }
        let mut it = events.into_iter();
        let Some(Event {
            seq,
            body: EventBody::Created { id, spec },
            ..
        }) = it.next()
        else {
            return Err(Error::Format(format!("{}: log does not start with a created event", path.display())));
        };
        let mut s = Self {
            id,
            state: spec.engine()?,
            spec,
            path: path.into(),
            file: None,
            seq,
            acks: BTreeMap::new(),
            issued: BTreeSet::new(),
            completed_logged: false,
        };
        for e in it {
            s.seq = e.seq;
            match e.body {
                EventBody::AnswerReceived { query_id, answer } => {
                    s.state.supply_answer(query_id, &answer)?;
                    s.acks.insert(
                        query_id,
                        Acknowledgment {
                            query_id,
                            seq: e.seq,
                            status: s.state.status,
                        },
                    );
                }
                EventBody::QueryIssued { query } => {
                    s.issued.insert(query.id);
                }
                EventBody::Completed { .. } => s.completed_logged = true,
                EventBody::Created { .. } => {}
            }
        }
        // Drop a torn tail so new events start on a fresh line.
        if bytes.len() > intact {
            let file = OpenOptions::new().write(true).open(path)?;
            file.set_len(intact as u64)?;
            file.sync_all()?;
        }
        s.file = Some(OpenOptions::new().append(true).open(path)?);
        // Events lost with the tail are re-derived.
        s.after_change()?;
        Ok(s)
    }

    fn append(&mut self, body: EventBody) -> Result<u64> {
        self.seq += 1;
        let event = Event {
            schema: EVENT_SCHEMA.into(),
            seq: self.seq,
            body,
        };
        let mut line = serde_json::to_string(&event).expect("events serialize");
        line.push('\n');
        let file = self.file.as_mut().expect("session log is open");
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(self.seq)
    }

    fn after_change(&mut self) -> Result<()> {
        let fresh: Vec<PendingQuery> = self
            .state
            .next_pending()
            .iter()
            .filter(|q| !self.issued.contains(&q.id))
            .cloned()
            .collect();
        for query in fresh {
            self.issued.insert(query.id);
            self.append(EventBody::QueryIssued { query })?;
        }
        if self.state.status == SolveStatus::Completed && !self.completed_logged {
            let result = self.result()?.expect("completed");
            self.append(EventBody::Completed { result })?;
            self.completed_logged = true;
        }
        Ok(())
    }

    /// Records an answer (0-based pieces or rooms). Repeating an identical
    /// answer returns the original acknowledgment.
    pub fn answer(&mut self, query_id: u64, answer: &[usize]) -> Result<Acknowledgment> {
        let mut normalized = answer.to_vec();
        normalized.sort_unstable();
        normalized.dedup();
        if let Some(prev) = self.state.answered.get(&query_id) {
            return if prev.answer == normalized {
                Ok(self.acks[&query_id].clone())
            } else {
                Err(Error::AnswerConflict(query_id))
            };
        }
        // Validate against a copy so rejected answers never reach the log.
        let mut trial = self.state.clone();
        trial.supply_answer(query_id, &normalized)?;
        let seq = self.append(EventBody::AnswerReceived {
            query_id,
            answer: normalized,
        })?;
        self.state = trial;
        let ack = Acknowledgment {
            query_id,
            seq,
            status: self.state.status,
        };
        self.acks.insert(query_id, ack.clone());
        self.after_change()?;
        Ok(ack)
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            schema: SESSION_SCHEMA.into(),
            id: self.id.clone(),
            kind: self.spec.kind,
            participants: self.spec.participants.clone(),
            status: self.state.status,
            resolution: self.state.resolution,
            answered: self.state.answered.len(),
            pending: self.state.next_pending().len(),
            failure: self.state.failure.clone(),
        }
    }

    pub fn queries(&self) -> Vec<QueryView> {
        self.state
            .next_pending()
            .iter()
            .map(|q| {
                let x = q.point.coords().to_vec();
                let mut view = QueryView {
                    id: q.id,
                    participant: q.cover,
                    name: self.spec.participants[q.cover].clone(),
                    x: x.clone(),
                    pieces: None,
                    rents: None,
                    free_rooms: None,
                };
                match self.spec.kind {
                    SessionKind::Cake => {
                        let p = CakePartition::new(&q.point);
                        view.pieces = Some((0..x.len()).map(|i| p.piece(i)).collect());
                    }
                    SessionKind::Rent => {
                        view.rents = Some(x.iter().map(|c| c * self.spec.total_rent).collect());
                        view.free_rooms = Some((0..x.len()).filter(|&i| x[i] == 0.0).collect());
                    }
                }
                view
            })
            .collect()
    }

    /// The final allocation, `None` while running.
    pub fn result(&self) -> Result<Option<SessionResult>> {
        let Some(cell) = self.state.outcome()? else {
            return Ok(None);
        };
        Ok(Some(match self.spec.kind {
            SessionKind::Cake => SessionResult::Cake(cake_result_from_cell(cell, None)?),
            SessionKind::Rent => SessionResult::Rent(rent_result_from_cell(cell, self.spec.total_rent, None)?),
        }))
    }
}
