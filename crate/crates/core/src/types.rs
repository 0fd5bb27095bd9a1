//! Identifiers and time-grid primitives shared by every stage.

use std::fmt;
use std::sync::Arc;

/// Opaque participant token. Cheap to clone; fixes for one user share the allocation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(Arc<str>);

impl UserId {
    pub fn new(id: impl AsRef<str>) -> Self {
        UserId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId::new(s)
    }
}

/// Unordered pair of distinct users, stored with `lo < hi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    lo: UserId,
    hi: UserId,
}

impl PairKey {
    /// Returns `None` when both ids are the same user.
    pub fn new(a: UserId, b: UserId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(PairKey { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(PairKey { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(&self) -> &UserId {
        &self.lo
    }

    pub fn hi(&self) -> &UserId {
        &self.hi
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", self.lo, self.hi)
    }
}

/// Index of a five-minute slot within a local calendar day, `0..288`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot(u16);

impl Slot {
    pub const MINUTES: u32 = 5;
    pub const SECONDS: i64 = 300;
    pub const PER_DAY: u16 = 288;

    pub fn new(index: u16) -> Option<Self> {
        (index < Self::PER_DAY).then_some(Slot(index))
    }

    pub fn index(self) -> u16 {
        self.0
    }

    /// Minute of the day at which the slot starts.
    pub fn start_minute(self) -> u32 {
        u32::from(self.0) * Self::MINUTES
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
