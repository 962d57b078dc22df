//! Users, assessment sessions and score trends, persisted as an event log.
//!
//! Every mutation is validated against the current state, appended to the
//! log and only then applied in memory, so replaying the log rebuilds the
//! same state.

mod log;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::log::{Event, EventLog, LogRecord, ReadRecord};
use crate::scoring::{self, AggregateResult, AnswerSet, Mode, ScoringError};
use crate::taxonomy::FrameworkDefinition;

/// File name of the event log inside the data directory.
pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub display_name: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub user_id: String,
    pub framework_id: String,
    pub status: SessionStatus,
    pub answers: AnswerSet,
    pub started_at: DateTime<Utc>,
    pub finalized_at: Option<DateTime<Utc>>,
    pub final_result: Option<AggregateResult>,
}

impl SessionRecord {
    pub fn is_open(&self) -> bool {
        self.status == SessionStatus::Open
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub session_id: String,
    pub finalized_at: DateTime<Utc>,
    pub overall_achievement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub user_id: String,
    pub points: Vec<TrendPoint>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown framework `{0}`")]
    UnknownFramework(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown leaf `{0}`")]
    UnknownLeaf(String),
    #[error("grade {grade} for `{leaf_id}` is outside the scale 0..={max}")]
    InvalidGrade { leaf_id: String, grade: i64, max: i64 },
    #[error("invalid user id `{0}`")]
    InvalidUserId(String),
    #[error("user `{0}` already exists")]
    UserExists(String),
    #[error("session `{0}` is already finalized")]
    AlreadyFinalized(String),
    #[error("session `{0}` is not finalized")]
    NotFinalized(String),
    #[error("{} leaf/leaves unanswered", .missing.len())]
    Incomplete { missing: Vec<String> },
    #[error("event log corrupt at line {line} (last good offset {last_good_offset}): {message}")]
    Corrupt {
        line: usize,
        last_good_offset: u64,
        message: String,
    },
    #[error("duplicate framework id `{0}`")]
    DuplicateFramework(String),
    #[error(transparent)]
    Scoring(ScoringError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<ScoringError> for StoreError {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::UnknownLeaf(id) => Self::UnknownLeaf(id),
            ScoringError::GradeOutOfScale {
                leaf_id,
                grade,
                max,
            } => Self::InvalidGrade {
                leaf_id,
                grade,
                max,
            },
            ScoringError::Incomplete { missing } => Self::Incomplete { missing },
            other => Self::Scoring(other),
        }
    }
}

/// Everything a reader can observe. Equal states mean equal visible stores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreState {
    pub users: BTreeMap<String, UserRecord>,
    pub sessions: BTreeMap<String, SessionRecord>,
    /// Session ids per user, in creation order.
    pub user_sessions: BTreeMap<String, Vec<String>>,
    /// Finalized session ids in finalization order.
    pub finalized: Vec<String>,
}

impl StoreState {
    /// Check `event` against the current state and apply it.
    fn apply(
        &mut self,
        frameworks: &BTreeMap<String, Arc<FrameworkDefinition>>,
        record: &LogRecord,
    ) -> Result<(), StoreError> {
        let at = record.timestamp;
        match &record.event {
            Event::UserCreated {
                user_id,
                display_name,
            } => {
                check_user_id(user_id)?;
                if self.users.contains_key(user_id) {
                    return Err(StoreError::UserExists(user_id.clone()));
                }
                self.users.insert(
                    user_id.clone(),
                    UserRecord {
                        user_id: user_id.clone(),
                        display_name: display_name.clone(),
                        created_at: at,
                    },
                );
                self.user_sessions.insert(user_id.clone(), Vec::new());
            }
            Event::SessionCreated {
                session_id,
                user_id,
                framework_id,
            } => {
                if !self.users.contains_key(user_id) {
                    return Err(StoreError::UnknownUser(user_id.clone()));
                }
                if !frameworks.contains_key(framework_id) {
                    return Err(StoreError::UnknownFramework(framework_id.clone()));
                }
                if self.sessions.contains_key(session_id) {
                    return Err(StoreError::Corrupt {
                        line: 0,
                        last_good_offset: 0,
                        message: format!("session `{session_id}` created twice"),
                    });
                }
                self.sessions.insert(
                    session_id.clone(),
                    SessionRecord {
                        session_id: session_id.clone(),
                        user_id: user_id.clone(),
                        framework_id: framework_id.clone(),
                        status: SessionStatus::Open,
                        answers: AnswerSet::new(framework_id),
                        started_at: at,
                        finalized_at: None,
                        final_result: None,
                    },
                );
                self.user_sessions
                    .entry(user_id.clone())
                    .or_default()
                    .push(session_id.clone());
            }
            Event::AnswerSubmitted {
                session_id,
                leaf_id,
                grade,
            } => {
                let session = open_session_mut(&mut self.sessions, session_id)?;
                let def = &frameworks[&session.framework_id];
                scoring::check_answer(def, leaf_id, *grade)?;
                session.answers.insert(leaf_id.clone(), *grade);
            }
            Event::SessionFinalized {
                session_id,
                final_result,
            } => {
                let session = open_session_mut(&mut self.sessions, session_id)?;
                session.status = SessionStatus::Finalized;
                session.finalized_at = Some(at);
                session.final_result = Some(final_result.clone());
                self.finalized.push(session_id.clone());
            }
        }
        Ok(())
    }
}

fn open_session_mut<'a>(
    sessions: &'a mut BTreeMap<String, SessionRecord>,
    session_id: &str,
) -> Result<&'a mut SessionRecord, StoreError> {
    let session = sessions
        .get_mut(session_id)
        .ok_or_else(|| StoreError::UnknownSession(session_id.to_owned()))?;
    if !session.is_open() {
        return Err(StoreError::AlreadyFinalized(session_id.to_owned()));
    }
    Ok(session)
}

fn check_user_id(user_id: &str) -> Result<(), StoreError> {
    let ok = !user_id.is_empty()
        && user_id.len() <= 128
        && user_id
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.' | '@'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidUserId(user_id.to_owned()))
    }
}

/// Single-writer session store. Wrap in a lock to share across threads.
pub struct Store {
    frameworks: BTreeMap<String, Arc<FrameworkDefinition>>,
    state: StoreState,
    log: Option<EventLog>,
    events: usize,
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn in_memory(frameworks: impl IntoIterator<Item = FrameworkDefinition>) -> Result<Self, StoreError> {
        Ok(Self {
            frameworks: index_frameworks(frameworks)?,
            state: StoreState::default(),
            log: None,
            events: 0,
        })
    }

    /// Open the event log in `data_dir` (creating both if needed) and replay it.
    pub fn open(
        data_dir: &Path,
        frameworks: impl IntoIterator<Item = FrameworkDefinition>,
    ) -> Result<Self, StoreError> {
        std::fs::create_dir_all(data_dir)?;
        let frameworks = index_frameworks(frameworks)?;
        let (log, records) = EventLog::open(&data_dir.join(LOG_FILE))?;
        let mut state = StoreState::default();
        for r in &records {
            state.apply(&frameworks, &r.record).map_err(|e| match e {
                StoreError::Corrupt { message, .. } => StoreError::Corrupt {
                    line: r.line_no,
                    last_good_offset: r.offset,
                    message,
                },
                other => StoreError::Corrupt {
                    line: r.line_no,
                    last_good_offset: r.offset,
                    message: other.to_string(),
                },
            })?;
        }
        Ok(Self {
            frameworks,
            state,
            log: Some(log),
            events: records.len(),
        })
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    /// Number of events applied since the log began.
    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn frameworks(&self) -> impl Iterator<Item = &Arc<FrameworkDefinition>> {
        self.frameworks.values()
    }

    pub fn framework(&self, id: &str) -> Option<&Arc<FrameworkDefinition>> {
        self.frameworks.get(id)
    }

    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.state.users.get(user_id)
    }

    pub fn session(&self, session_id: &str) -> Option<&SessionRecord> {
        self.state.sessions.get(session_id)
    }

    fn session_or_err(&self, session_id: &str) -> Result<&SessionRecord, StoreError> {
        self.session(session_id)
            .ok_or_else(|| StoreError::UnknownSession(session_id.to_owned()))
    }

    /// How many sessions a user has started.
    pub fn experiment_count(&self, user_id: &str) -> usize {
        self.state
            .user_sessions
            .get(user_id)
            .map_or(0, Vec::len)
    }

    fn commit(&mut self, event: Event) -> Result<(), StoreError> {
        let record = LogRecord {
            timestamp: Utc::now(),
            event,
        };
        // Callers check every precondition `apply` enforces before this point.
        if let Some(log) = &mut self.log {
            log.append(&record)?;
        }
        self.state.apply(&self.frameworks, &record)?;
        self.events += 1;
        Ok(())
    }

    pub fn create_user(&mut self, user_id: &str, display_name: &str) -> Result<UserRecord, StoreError> {
        check_user_id(user_id)?;
        if self.state.users.contains_key(user_id) {
            return Err(StoreError::UserExists(user_id.to_owned()));
        }
        let display_name = if display_name.trim().is_empty() {
            user_id
        } else {
            display_name
        };
        self.commit(Event::UserCreated {
            user_id: user_id.to_owned(),
            display_name: display_name.to_owned(),
        })?;
        Ok(self.state.users[user_id].clone())
    }

    pub fn create_session(&mut self, user_id: &str, framework_id: &str) -> Result<SessionRecord, StoreError> {
        if !self.state.users.contains_key(user_id) {
            return Err(StoreError::UnknownUser(user_id.to_owned()));
        }
        if !self.frameworks.contains_key(framework_id) {
            return Err(StoreError::UnknownFramework(framework_id.to_owned()));
        }
        let session_id = loop {
            let id = new_session_id(Utc::now());
            if !self.state.sessions.contains_key(&id) {
                break id;
            }
        };
        self.commit(Event::SessionCreated {
            session_id: session_id.clone(),
            user_id: user_id.to_owned(),
            framework_id: framework_id.to_owned(),
        })?;
        Ok(self.state.sessions[&session_id].clone())
    }

    /// Record a grade; a later grade for the same leaf replaces the earlier one.
    pub fn submit_answer(&mut self, session_id: &str, leaf_id: &str, grade: i64) -> Result<SessionRecord, StoreError> {
        let session = self.session_or_err(session_id)?;
        if !session.is_open() {
            return Err(StoreError::AlreadyFinalized(session_id.to_owned()));
        }
        scoring::check_answer(&self.frameworks[&session.framework_id], leaf_id, grade)?;
        self.commit(Event::AnswerSubmitted {
            session_id: session_id.to_owned(),
            leaf_id: leaf_id.to_owned(),
            grade,
        })?;
        Ok(self.state.sessions[session_id].clone())
    }

    /// Score the session in strict mode and freeze it.
    pub fn finalize_session(&mut self, session_id: &str) -> Result<SessionRecord, StoreError> {
        let session = self.session_or_err(session_id)?;
        if !session.is_open() {
            return Err(StoreError::AlreadyFinalized(session_id.to_owned()));
        }
        let def = &self.frameworks[&session.framework_id];
        let final_result = scoring::aggregate(def, &session.answers, Mode::Strict)?;
        self.commit(Event::SessionFinalized {
            session_id: session_id.to_owned(),
            final_result,
        })?;
        Ok(self.state.sessions[session_id].clone())
    }

    /// The stored strict result of a finalized session.
    pub fn final_result(&self, session_id: &str) -> Result<&AggregateResult, StoreError> {
        self.session_or_err(session_id)?
            .final_result
            .as_ref()
            .ok_or_else(|| StoreError::NotFinalized(session_id.to_owned()))
    }

    /// Overall achievement of every finalized session of a user, oldest first.
    pub fn trend(&self, user_id: &str) -> Result<TrendReport, StoreError> {
        if !self.state.users.contains_key(user_id) {
            return Err(StoreError::UnknownUser(user_id.to_owned()));
        }
        let mut points: Vec<TrendPoint> = self
            .state
            .finalized
            .iter()
            .map(|id| &self.state.sessions[id])
            .filter(|s| s.user_id == user_id)
            .map(|s| TrendPoint {
                session_id: s.session_id.clone(),
                finalized_at: s.finalized_at.expect("finalized sessions carry a timestamp"),
                overall_achievement: s
                    .final_result
                    .as_ref()
                    .and_then(AggregateResult::overall)
                    .expect("finalized sessions carry a strict result"),
            })
            .collect();
        points.sort_by_key(|p| p.finalized_at);
        let deltas = points
            .windows(2)
            .map(|w| w[1].overall_achievement - w[0].overall_achievement)
            .collect();
        Ok(TrendReport {
            user_id: user_id.to_owned(),
            points,
            deltas,
        })
    }
}

fn index_frameworks(
    frameworks: impl IntoIterator<Item = FrameworkDefinition>,
) -> Result<BTreeMap<String, Arc<FrameworkDefinition>>, StoreError> {
    let mut map = BTreeMap::new();
    for def in frameworks {
        let id = def.id.clone();
        if map.insert(id.clone(), Arc::new(def)).is_some() {
            return Err(StoreError::DuplicateFramework(id));
        }
    }
    Ok(map)
}

/// `20261015T093012345Z-1a2b3c4d`: UTC timestamp plus a random suffix.
fn new_session_id(now: DateTime<Utc>) -> String {
    let mut id = now.format("%Y%m%dT%H%M%S%3fZ").to_string();
    let suffix: u32 = rand::rng().random();
    let _ = write!(id, "-{suffix:08x}");
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::builtin_iso27001;

    fn store() -> Store {
        let mut s = Store::in_memory([builtin_iso27001()]).unwrap();
        s.create_user("alice", "Alice").unwrap();
        s
    }

    fn fill(store: &mut Store, session_id: &str, grade: i64) {
        let leaves: Vec<String> = builtin_iso27001().leaves().map(|l| l.id.clone()).collect();
        for leaf in leaves {
            store.submit_answer(session_id, &leaf, grade).unwrap();
        }
    }

    #[test]
    fn new_session_is_open_and_empty() {
        let mut s = store();
        let a = s.create_session("alice", "iso27001").unwrap();
        assert!(a.is_open());
        assert!(a.answers.is_empty());
        let b = s.create_session("alice", "iso27001").unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(s.experiment_count("alice"), 2);
    }

    #[test]
    fn create_session_rejects_unknown_refs() {
        let mut s = store();
        assert!(matches!(
            s.create_session("alice", "cobit"),
            Err(StoreError::UnknownFramework(_))
        ));
        assert!(matches!(
            s.create_session("bob", "iso27001"),
            Err(StoreError::UnknownUser(_))
        ));
    }

    #[test]
    fn user_ids_are_unique_and_well_formed() {
        let mut s = store();
        assert!(matches!(s.create_user("alice", ""), Err(StoreError::UserExists(_))));
        assert!(matches!(s.create_user("", "x"), Err(StoreError::InvalidUserId(_))));
        assert!(matches!(s.create_user("a b", "x"), Err(StoreError::InvalidUserId(_))));
        assert_eq!(s.create_user("bob", "").unwrap().display_name, "bob");
    }

    #[test]
    fn answers_are_last_write_wins() {
        let mut s = store();
        let id = s.create_session("alice", "iso27001").unwrap().session_id;
        s.submit_answer(&id, "organization.6.1.3.q1", 4).unwrap();
        assert_eq!(s.session(&id).unwrap().answers.answers["organization.6.1.3.q1"], 4);
        s.submit_answer(&id, "organization.6.1.3.q1", 2).unwrap();
        let rec = s.submit_answer(&id, "organization.6.1.3.q1", 3).unwrap();
        assert_eq!(rec.answers.answers["organization.6.1.3.q1"], 3);
        assert_eq!(rec.answers.len(), 1);
    }

    #[test]
    fn submit_rejects_bad_input() {
        let mut s = store();
        let id = s.create_session("alice", "iso27001").unwrap().session_id;
        assert!(matches!(
            s.submit_answer(&id, "organization.6.1.3.q1", 7),
            Err(StoreError::InvalidGrade { grade: 7, .. })
        ));
        assert!(matches!(
            s.submit_answer(&id, "organization.6.1.3", 2),
            Err(StoreError::UnknownLeaf(_))
        ));
        assert!(matches!(
            s.submit_answer("nope", "organization.6.1.3.q1", 2),
            Err(StoreError::UnknownSession(_))
        ));
    }

    #[test]
    fn finalize_requires_every_leaf() {
        let mut s = store();
        let id = s.create_session("alice", "iso27001").unwrap().session_id;
        let def = builtin_iso27001();
        let skip = ["policy.5.1.1.q3", "culture.13.2.2.q1", "stakeholder.8.2.2.q3"];
        for leaf in def.leaves().filter(|l| !skip.contains(&l.id.as_str())) {
            s.submit_answer(&id, &leaf.id, 2).unwrap();
        }
        match s.finalize_session(&id) {
            Err(StoreError::Incomplete { missing }) => assert_eq!(missing, skip),
            other => panic!("expected incomplete, got {other:?}"),
        }
        assert!(s.session(&id).unwrap().is_open());
    }

    #[test]
    fn finalized_sessions_are_frozen() {
        let mut s = store();
        let id = s.create_session("alice", "iso27001").unwrap().session_id;
        fill(&mut s, &id, 3);
        let done = s.finalize_session(&id).unwrap();
        assert_eq!(done.status, SessionStatus::Finalized);
        assert_eq!(done.final_result.as_ref().unwrap().overall(), Some(3.0));
        let before = s.state().clone();
        assert!(matches!(s.finalize_session(&id), Err(StoreError::AlreadyFinalized(_))));
        assert!(matches!(
            s.submit_answer(&id, "policy.5.1.1.q1", 1),
            Err(StoreError::AlreadyFinalized(_))
        ));
        assert_eq!(s.state(), &before);
    }

    #[test]
    fn trend_reports_successive_deltas() {
        let mut s = store();
        assert_eq!(s.trend("alice").unwrap().points.len(), 0);
        assert!(s.trend("alice").unwrap().deltas.is_empty());
        for grade in [2, 3] {
            let id = s.create_session("alice", "iso27001").unwrap().session_id;
            fill(&mut s, &id, grade);
            s.finalize_session(&id).unwrap();
            let t = s.trend("alice").unwrap();
            assert_eq!(t.deltas.len(), t.points.len() - 1);
        }
        // An open session does not appear.
        s.create_session("alice", "iso27001").unwrap();
        let t = s.trend("alice").unwrap();
        assert_eq!(t.points.len(), 2);
        assert_eq!(t.deltas, [1.0]);
        assert!(matches!(s.trend("zed"), Err(StoreError::UnknownUser(_))));
    }

    #[test]
    fn session_ids_embed_timestamp() {
        let now = DateTime::parse_from_rfc3339("2026-10-15T09:30:12.345Z")
            .unwrap()
            .with_timezone(&Utc);
        let id = new_session_id(now);
        assert!(id.starts_with("20261015T093012345Z-"));
        assert_eq!(id.len(), "20261015T093012345Z-".len() + 8);
    }

    #[test]
    fn reopening_replays_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let state = {
            let mut s = Store::open(dir.path(), [builtin_iso27001()]).unwrap();
            s.create_user("alice", "Alice").unwrap();
            let id = s.create_session("alice", "iso27001").unwrap().session_id;
            fill(&mut s, &id, 4);
            s.finalize_session(&id).unwrap();
            s.state().clone()
        };
        let s = Store::open(dir.path(), [builtin_iso27001()]).unwrap();
        assert_eq!(s.state(), &state);
    }

    #[test]
    fn replay_against_missing_framework_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open(dir.path(), [builtin_iso27001()]).unwrap();
            s.create_user("alice", "Alice").unwrap();
            s.create_session("alice", "iso27001").unwrap();
        }
        match Store::open(dir.path(), []) {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
            Err(e) => panic!("expected corruption, got {e}"),
            Ok(_) => panic!("expected corruption"),
        }
    }
}
