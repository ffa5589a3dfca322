use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BoardKind, Ledger, LeaderboardError, Points, ScoreFilter, Standing, TimeWindow};
use crate::graph::{EntityId, EntityKind, GraphSnapshot};

const ABSOLUTE_ROWS: usize = 10;
const SPLIT_TOP_ROWS: usize = 5;
const SPLIT_BAND_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewDesign {
    /// Top ten, with the active user pinned underneath when ranked lower.
    HybridAbsolute,
    /// Top five, then a band of five centred on the active user.
    Hybrid5050,
}

impl fmt::Display for ViewDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewDesign::HybridAbsolute => "hybrid_absolute",
            ViewDesign::Hybrid5050 => "hybrid5050",
        })
    }
}

impl FromStr for ViewDesign {
    type Err = LeaderboardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "hybridabsolute" | "absolute" => Ok(ViewDesign::HybridAbsolute),
            "hybrid5050" | "hybrid50" | "5050" => Ok(ViewDesign::Hybrid5050),
            _ => Err(LeaderboardError::BadFilter {
                what: "design",
                value: s.to_string(),
            }),
        }
    }
}

impl ViewDesign {
    /// Concepts draw broad audiences and use the absolute layout; courses
    /// use the split layout.
    pub fn default_for(kind: EntityKind) -> Self {
        match kind {
            EntityKind::Course => ViewDesign::Hybrid5050,
            _ => ViewDesign::HybridAbsolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub user: EntityId,
    pub name: String,
    pub score: Points,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardView {
    pub context: Option<EntityId>,
    pub window: TimeWindow,
    pub kind: BoardKind,
    pub design: ViewDesign,
    /// Users ranked in total, the active user included.
    pub ranked: usize,
    pub rows: Vec<LeaderboardRow>,
}

/// 1-based ranks to show for a leaderboard of `total` users with the active
/// user at `active`.
pub fn visible_ranks(design: ViewDesign, total: usize, active: usize) -> Vec<usize> {
    match design {
        ViewDesign::HybridAbsolute => {
            let mut ranks: Vec<usize> = (1..=total.min(ABSOLUTE_ROWS)).collect();
            if active > ABSOLUTE_ROWS {
                ranks.push(active);
            }
            ranks
        }
        ViewDesign::Hybrid5050 => {
            let low = active.saturating_sub(SPLIT_BAND_RADIUS).max(1);
            let high = (active + SPLIT_BAND_RADIUS).min(total);
            let mut ranks: Vec<usize> = (1..=total.min(SPLIT_TOP_ROWS)).chain(low..=high).collect();
            ranks.sort_unstable();
            ranks.dedup();
            ranks
        }
    }
}

impl Ledger {
    pub fn build_view(
        &self,
        graph: &GraphSnapshot,
        filter: &ScoreFilter,
        active_user: &EntityId,
        design: ViewDesign,
    ) -> Result<LeaderboardView, LeaderboardError> {
        match graph.get(active_user) {
            Some(e) if e.kind == EntityKind::User => {}
            _ => return Err(LeaderboardError::UnknownUser(active_user.clone())),
        }
        let mut standings = self.standings(filter);
        let active = match standings.iter().position(|s| &s.user == active_user) {
            Some(i) => i + 1,
            None => {
                standings.push(Standing {
                    user: active_user.clone(),
                    score: Points::ZERO,
                    reached_at: filter.now,
                });
                standings.len()
            }
        };
        let rows = visible_ranks(design, standings.len(), active)
            .into_iter()
            .map(|rank| {
                let s = &standings[rank - 1];
                LeaderboardRow {
                    rank,
                    user: s.user.clone(),
                    name: graph.get(&s.user).map(|e| e.name.clone()).unwrap_or_default(),
                    score: s.score,
                    active: rank == active,
                }
            })
            .collect();
        Ok(LeaderboardView {
            context: filter.context.clone(),
            window: filter.window,
            kind: filter.kind,
            design,
            ranked: standings.len(),
            rows,
        })
    }
}
