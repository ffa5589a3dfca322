//! Gamification: an append-only activity ledger scored with a fixed points
//! table, filtered by context, time window and leaderboard type, and shown
//! through two hybrid leaderboard layouts.

mod points;
mod view;

pub use points::{ActionKind, Points};
pub use view::{visible_ranks, LeaderboardRow, LeaderboardView, ViewDesign};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, EntityKind, GraphSnapshot, Timestamp};

pub type ActivityId = u64;

const DAY: Timestamp = 24 * 3600;

#[derive(Debug, Error)]
pub enum LeaderboardError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("unknown user `{0}`")]
    UnknownUser(EntityId),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown activity #{0}")]
    UnknownActivity(ActivityId),
    #[error("activity #{activity} belongs to `{owner}`, not `{actor}`")]
    NotOwner {
        activity: ActivityId,
        owner: EntityId,
        actor: EntityId,
    },
    #[error("activity #{0} was already deleted")]
    AlreadyDeleted(ActivityId),
    #[error("activity #{0} is a delete record")]
    DeleteOfDelete(ActivityId),
    #[error("upvote target #{0} is not a comment")]
    InvalidTarget(ActivityId),
    #[error("unknown {what} `{value}`")]
    BadFilter { what: &'static str, value: String },
    #[error("ledger line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("ledger i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub id: ActivityId,
    pub actor: EntityId,
    pub action: ActionKind,
    /// Space the action happened in (concept, course, user page).
    pub location: EntityId,
    /// Thing acted upon.
    pub object: EntityId,
    pub ts: Timestamp,
    pub points: Points,
    /// For comment upvotes: the comment activity being upvoted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ActivityId>,
    /// Set on delete records: the activity being withdrawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverts: Option<ActivityId>,
}

impl Activity {
    pub fn is_delete(&self) -> bool {
        self.reverts.is_some()
    }
}

/// An activity before points and id are assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewActivity {
    pub actor: EntityId,
    pub action: ActionKind,
    pub location: EntityId,
    pub object: EntityId,
    pub ts: Timestamp,
    #[serde(default)]
    pub target: Option<ActivityId>,
}

impl NewActivity {
    pub fn new(
        actor: impl Into<EntityId>,
        action: ActionKind,
        location: impl Into<EntityId>,
        object: impl Into<EntityId>,
        ts: Timestamp,
    ) -> Self {
        Self {
            actor: actor.into(),
            action,
            location: location.into(),
            object: object.into(),
            ts,
            target: None,
        }
    }

    pub fn upvoting(mut self, comment: ActivityId) -> Self {
        self.target = Some(comment);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWindow {
    Week,
    Month,
    Semester,
    AllTime,
}

impl TimeWindow {
    /// Rolling length in seconds; `None` for all time.
    pub fn length(self) -> Option<Timestamp> {
        match self {
            TimeWindow::Week => Some(7 * DAY),
            TimeWindow::Month => Some(30 * DAY),
            TimeWindow::Semester => Some(180 * DAY),
            TimeWindow::AllTime => None,
        }
    }

    pub fn ending_at(self, now: Timestamp) -> TimeRange {
        TimeRange {
            after: self.length().map(|len| now - len),
            until: now,
        }
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeWindow::Week => "week",
            TimeWindow::Month => "month",
            TimeWindow::Semester => "semester",
            TimeWindow::AllTime => "all_time",
        })
    }
}

impl FromStr for TimeWindow {
    type Err = LeaderboardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "week" => Ok(TimeWindow::Week),
            "month" => Ok(TimeWindow::Month),
            "semester" => Ok(TimeWindow::Semester),
            "all" | "all_time" | "alltime" => Ok(TimeWindow::AllTime),
            _ => Err(LeaderboardError::BadFilter {
                what: "window",
                value: s.to_string(),
            }),
        }
    }
}

/// Half-open interval `(after, until]`; `after = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub after: Option<Timestamp>,
    pub until: Timestamp,
}

impl TimeRange {
    pub fn contains(&self, ts: Timestamp) -> bool {
        ts <= self.until && self.after.is_none_or(|a| ts > a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoardKind {
    TopContributor,
    TopResponder,
}

impl fmt::Display for BoardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoardKind::TopContributor => "contributor",
            BoardKind::TopResponder => "responder",
        })
    }
}

impl FromStr for BoardKind {
    type Err = LeaderboardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "contributor" | "top_contributor" => Ok(BoardKind::TopContributor),
            "responder" | "top_responder" => Ok(BoardKind::TopResponder),
            _ => Err(LeaderboardError::BadFilter {
                what: "kind",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFilter {
    /// Location to restrict to; `None` aggregates every context.
    pub context: Option<EntityId>,
    pub window: TimeWindow,
    pub kind: BoardKind,
    pub now: Timestamp,
}

impl ScoreFilter {
    pub fn new(context: Option<EntityId>, window: TimeWindow, kind: BoardKind, now: Timestamp) -> Self {
        Self {
            context,
            window,
            kind,
            now,
        }
    }
}

/// One user's final score and the moment the running total first reached it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Standing {
    pub user: EntityId,
    pub score: Points,
    pub reached_at: Timestamp,
}

/// Append-only activity ledger. Appends take `&mut self`; scoring and views
/// only read.
#[derive(Debug)]
pub struct Ledger {
    records: Vec<Activity>,
    deleted: HashSet<ActivityId>,
    upvote_bonus: Points,
    sink: Option<File>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Ledger {
    pub fn in_memory() -> Self {
        Self {
            records: Vec::new(),
            deleted: HashSet::new(),
            upvote_bonus: Points::from_tenths(10),
            sink: None,
        }
    }

    /// Opens (or creates) a JSON-lines ledger, replaying existing records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LeaderboardError> {
        let path = path.as_ref();
        let mut ledger = Self::in_memory();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Activity =
                    serde_json::from_str(&line).map_err(|e| LeaderboardError::Corrupt {
                        line: n + 1,
                        message: e.to_string(),
                    })?;
                if record.id != ledger.records.len() as ActivityId {
                    return Err(LeaderboardError::Corrupt {
                        line: n + 1,
                        message: format!("expected activity #{}", ledger.records.len()),
                    });
                }
                ledger.push(record);
            }
        }
        ledger.sink = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(ledger)
    }

    /// Extra score a responder earns per upvote their comment receives.
    pub fn with_upvote_bonus(mut self, bonus: Points) -> Self {
        self.upvote_bonus = bonus;
        self
    }

    pub fn upvote_bonus(&self) -> Points {
        self.upvote_bonus
    }

    pub fn records(&self) -> &[Activity] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ActivityId) -> Option<&Activity> {
        self.records.get(id as usize)
    }

    fn push(&mut self, record: Activity) {
        if let Some(original) = record.reverts {
            self.deleted.insert(original);
        }
        self.records.push(record);
    }

    fn append(&mut self, record: Activity) -> Result<&Activity, LeaderboardError> {
        if let Some(sink) = &mut self.sink {
            let mut line = serde_json::to_string(&record).expect("activities serialize");
            line.push('\n');
            sink.write_all(line.as_bytes())?;
            sink.flush()?;
        }
        self.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn record_activity(
        &mut self,
        graph: &GraphSnapshot,
        new: NewActivity,
    ) -> Result<&Activity, LeaderboardError> {
        match graph.get(&new.actor) {
            Some(e) if e.kind == EntityKind::User => {}
            Some(_) => return Err(LeaderboardError::UnknownUser(new.actor)),
            None => return Err(LeaderboardError::UnknownEntity(new.actor)),
        }
        for id in [&new.location, &new.object] {
            if !graph.contains(id) {
                return Err(LeaderboardError::UnknownEntity(id.clone()));
            }
        }
        if let Some(target) = new.target {
            let comment = self
                .get(target)
                .ok_or(LeaderboardError::UnknownActivity(target))?;
            if !new.action.is_comment_upvote() || !comment.action.is_comment() || comment.is_delete() {
                return Err(LeaderboardError::InvalidTarget(target));
            }
        }
        let record = Activity {
            id: self.records.len() as ActivityId,
            actor: new.actor,
            action: new.action,
            location: new.location,
            object: new.object,
            ts: new.ts,
            points: new.action.points(),
            target: new.target,
            reverts: None,
        };
        self.append(record)
    }

    /// Withdraws one of `actor`'s own activities by appending a mirror
    /// record with negated points. Nobody else's points change.
    pub fn record_delete(
        &mut self,
        actor: &EntityId,
        activity: ActivityId,
        ts: Timestamp,
    ) -> Result<&Activity, LeaderboardError> {
        let original = self
            .get(activity)
            .ok_or(LeaderboardError::UnknownActivity(activity))?;
        if original.is_delete() {
            return Err(LeaderboardError::DeleteOfDelete(activity));
        }
        if &original.actor != actor {
            return Err(LeaderboardError::NotOwner {
                activity,
                owner: original.actor.clone(),
                actor: actor.clone(),
            });
        }
        if self.deleted.contains(&activity) {
            return Err(LeaderboardError::AlreadyDeleted(activity));
        }
        let mirror = Activity {
            id: self.records.len() as ActivityId,
            actor: original.actor.clone(),
            action: original.action,
            location: original.location.clone(),
            object: original.object.clone(),
            ts,
            points: -original.points,
            target: original.target,
            reverts: Some(activity),
        };
        self.append(mirror)
    }

    /// Score contributions `(ts, user, delta)` in ledger order.
    fn contributions<'a>(
        &'a self,
        context: Option<&'a EntityId>,
        range: TimeRange,
        kind: BoardKind,
    ) -> impl Iterator<Item = (Timestamp, &'a EntityId, Points)> + 'a {
        self.records
            .iter()
            .filter(move |r| range.contains(r.ts) && context.is_none_or(|c| &r.location == c))
            .filter_map(move |r| match kind {
                BoardKind::TopContributor => Some((r.ts, &r.actor, r.points)),
                BoardKind::TopResponder if r.action.is_comment() => Some((r.ts, &r.actor, r.points)),
                BoardKind::TopResponder => {
                    let comment = self.get(r.target?)?;
                    let sign = if r.is_delete() { -1 } else { 1 };
                    Some((r.ts, &comment.actor, self.upvote_bonus * sign))
                }
            })
    }

    /// Net score of every user with at least one matching record, including
    /// zero and negative totals.
    pub fn totals_in(
        &self,
        context: Option<&EntityId>,
        range: TimeRange,
        kind: BoardKind,
    ) -> BTreeMap<EntityId, Points> {
        let mut totals = BTreeMap::new();
        for (_, user, delta) in self.contributions(context, range, kind) {
            *totals.entry(user.clone()).or_insert(Points::ZERO) += delta;
        }
        totals
    }

    /// Positive scores under `filter`.
    pub fn compute_scores(&self, filter: &ScoreFilter) -> BTreeMap<EntityId, Points> {
        let mut totals = self.totals_in(
            filter.context.as_ref(),
            filter.window.ending_at(filter.now),
            filter.kind,
        );
        totals.retain(|_, p| p.is_positive());
        totals
    }

    /// Users with a positive score, best first. Equal scores go to whoever
    /// reached the score earliest, then to the smaller id.
    pub fn standings(&self, filter: &ScoreFilter) -> Vec<Standing> {
        let range = filter.window.ending_at(filter.now);
        let mut events: Vec<(Timestamp, &EntityId, Points)> = self
            .contributions(filter.context.as_ref(), range, filter.kind)
            .collect();
        events.sort_by_key(|&(ts, _, _)| ts);

        let mut finals: HashMap<&EntityId, Points> = HashMap::new();
        for &(_, user, delta) in &events {
            *finals.entry(user).or_insert(Points::ZERO) += delta;
        }
        let mut running: HashMap<&EntityId, Points> = HashMap::new();
        let mut reached: HashMap<&EntityId, Timestamp> = HashMap::new();
        for &(ts, user, delta) in &events {
            let total = running.entry(user).or_insert(Points::ZERO);
            *total += delta;
            if *total == finals[user] {
                reached.entry(user).or_insert(ts);
            }
        }

        let mut out: Vec<Standing> = finals
            .into_iter()
            .filter(|(_, score)| score.is_positive())
            .map(|(user, score)| Standing {
                user: user.clone(),
                score,
                reached_at: reached[user],
            })
            .collect();
        out.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then(a.reached_at.cmp(&b.reached_at))
                .then_with(|| a.user.cmp(&b.user))
        });
        out
    }
}
