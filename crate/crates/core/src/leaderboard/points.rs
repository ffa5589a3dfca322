use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LeaderboardError;

/// Fixed-point score in tenths of a point, so table sums never drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Points(i64);

impl Points {
    pub const ZERO: Points = Points(0);

    pub const fn from_tenths(tenths: i64) -> Self {
        Self(tenths)
    }

    pub fn tenths(self) -> i64 {
        self.0
    }

    /// Nearest tenth of `value`.
    pub fn from_f64(value: f64) -> Self {
        Self((value * 10.0).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl AddAssign for Points {
    fn add_assign(&mut self, rhs: Points) {
        self.0 += rhs.0;
    }
}

impl Neg for Points {
    type Output = Points;
    fn neg(self) -> Points {
        Points(-self.0)
    }
}

impl Mul<i64> for Points {
    type Output = Points;
    fn mul(self, rhs: i64) -> Points {
        Points(self.0 * rhs)
    }
}

impl std::iter::Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, Add::add)
    }
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Points::from_f64)
    }
}

/// The eleven point-bearing actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    SourceAdd,
    SourceShare,
    SourceRate,
    SourceComment,
    SourceUpvoteComment,
    PostAdd,
    PostShare,
    PostLike,
    PostComment,
    PostUpvoteComment,
    Include,
}

impl ActionKind {
    pub const ALL: [ActionKind; 11] = [
        ActionKind::SourceAdd,
        ActionKind::SourceShare,
        ActionKind::SourceRate,
        ActionKind::SourceComment,
        ActionKind::SourceUpvoteComment,
        ActionKind::PostAdd,
        ActionKind::PostShare,
        ActionKind::PostLike,
        ActionKind::PostComment,
        ActionKind::PostUpvoteComment,
        ActionKind::Include,
    ];

    /// Points awarded per action: interview-averaged effort plus value.
    pub const fn points(self) -> Points {
        Points::from_tenths(match self {
            ActionKind::SourceAdd => 91,
            ActionKind::SourceShare => 78,
            ActionKind::SourceRate => 63,
            ActionKind::SourceComment => 64,
            ActionKind::SourceUpvoteComment => 51,
            ActionKind::PostAdd => 70,
            ActionKind::PostShare => 58,
            ActionKind::PostLike => 57,
            ActionKind::PostComment => 62,
            ActionKind::PostUpvoteComment => 57,
            ActionKind::Include => 47,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::SourceAdd => "source_add",
            ActionKind::SourceShare => "source_share",
            ActionKind::SourceRate => "source_rate",
            ActionKind::SourceComment => "source_comment",
            ActionKind::SourceUpvoteComment => "source_upvote_comment",
            ActionKind::PostAdd => "post_add",
            ActionKind::PostShare => "post_share",
            ActionKind::PostLike => "post_like",
            ActionKind::PostComment => "post_comment",
            ActionKind::PostUpvoteComment => "post_upvote_comment",
            ActionKind::Include => "include",
        }
    }

    pub fn is_comment(self) -> bool {
        matches!(self, ActionKind::SourceComment | ActionKind::PostComment)
    }

    pub fn is_comment_upvote(self) -> bool {
        matches!(
            self,
            ActionKind::SourceUpvoteComment | ActionKind::PostUpvoteComment
        )
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = LeaderboardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.replace('-', "_");
        ActionKind::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(&wanted))
            .ok_or_else(|| LeaderboardError::UnknownAction(s.to_string()))
    }
}
