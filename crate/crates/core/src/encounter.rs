//! Pairwise co-location detection on the five-minute grid.
//!
//! Two users encounter each other in a slot when both have a cleaned fix
//! there, on one of their common days, within `threshold_m` meters. Each
//! encounter is labelled with the length-8 geohash of the fixes' midpoint;
//! the cell is only a location label, never part of the co-location test.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::geo::{geohash_encode, haversine_m, GeohashCell, LatLon};
use crate::ingest::SurveyRecord;
use crate::preprocess::{
    common_days, expect_header, field, parse_day, parse_slot, table_reader, CleanFix, ValidDaySet,
    DAY_FORMAT,
};
use crate::types::{PairKey, Slot, UserId};

pub const DEFAULT_THRESHOLD_M: f64 = 50.0;
pub const CELL_LENGTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Encounter {
    pub pair: PairKey,
    pub day: NaiveDate,
    pub slot: Slot,
    pub cell: GeohashCell,
}

/// All encounters of one pair, ordered by (day, slot).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncounterSet {
    pub pair: PairKey,
    pub encounters: Vec<Encounter>,
}

impl EncounterSet {
    pub fn empty(pair: PairKey) -> Self {
        EncounterSet {
            pair,
            encounters: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.encounters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encounters.is_empty()
    }

    /// Encounters falling on any of `days`.
    pub fn restricted_to(&self, days: &BTreeSet<NaiveDate>) -> EncounterSet {
        EncounterSet {
            pair: self.pair.clone(),
            encounters: self
                .encounters
                .iter()
                .filter(|e| days.contains(&e.day))
                .cloned()
                .collect(),
        }
    }
}

/// Per-user, per-day fixes sorted by slot.
#[derive(Debug, Default)]
pub struct FixIndex {
    by_user: BTreeMap<UserId, BTreeMap<NaiveDate, Vec<(Slot, LatLon)>>>,
}

impl FixIndex {
    /// Expects at most one fix per (user, day, slot), as produced by deduplication.
    pub fn new(fixes: &[CleanFix]) -> Self {
        let mut by_user: BTreeMap<UserId, BTreeMap<NaiveDate, Vec<(Slot, LatLon)>>> =
            BTreeMap::new();
        for f in fixes {
            by_user
                .entry(f.user.clone())
                .or_default()
                .entry(f.day)
                .or_default()
                .push((f.slot, LatLon::new(f.lat, f.lon)));
        }
        for days in by_user.values_mut() {
            for slots in days.values_mut() {
                slots.sort_by_key(|(s, _)| *s);
            }
        }
        FixIndex { by_user }
    }

    fn day(&self, user: &UserId, day: NaiveDate) -> &[(Slot, LatLon)] {
        self.by_user
            .get(user)
            .and_then(|d| d.get(&day))
            .map_or(&[], Vec::as_slice)
    }
}

/// Surveyed pairs whose users were both retained and share at least
/// `min_common_days` valid days.
pub fn eligible_pairs(
    survey: &[SurveyRecord],
    valid_days: &BTreeMap<UserId, ValidDaySet>,
    min_common_days: usize,
) -> BTreeSet<PairKey> {
    survey
        .iter()
        .filter_map(|r| {
            let a = valid_days.get(&r.rater)?;
            let b = valid_days.get(&r.ratee)?;
            (common_days(a, b).len() >= min_common_days)
                .then(|| PairKey::new(r.rater.clone(), r.ratee.clone()))
                .flatten()
        })
        .collect()
}

fn pair_encounters(
    index: &FixIndex,
    pair: &PairKey,
    days: &[NaiveDate],
    threshold_m: f64,
) -> Result<EncounterSet> {
    let mut encounters = Vec::new();
    for &day in days {
        let a = index.day(pair.lo(), day);
        let b = index.day(pair.hi(), day);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let (slot_a, pa) = a[i];
            let (slot_b, pb) = b[j];
            match slot_a.cmp(&slot_b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if haversine_m(pa, pb) <= threshold_m {
                        encounters.push(Encounter {
                            pair: pair.clone(),
                            day,
                            slot: slot_a,
                            cell: geohash_encode(pa.midpoint(pb), CELL_LENGTH)?,
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    Ok(EncounterSet {
        pair: pair.clone(),
        encounters,
    })
}

/// Detects encounters for each requested pair on that pair's common days.
/// Every requested pair appears in the output, possibly with no encounters.
pub fn detect_encounters<'a>(
    index: &FixIndex,
    valid_days: &BTreeMap<UserId, ValidDaySet>,
    pairs: impl IntoIterator<Item = &'a PairKey>,
    threshold_m: f64,
) -> Result<BTreeMap<PairKey, EncounterSet>> {
    if !(threshold_m > 0.0) || !threshold_m.is_finite() {
        return Err(Error::config(format!(
            "distance threshold must be positive, got {threshold_m}"
        )));
    }
    let mut out = BTreeMap::new();
    for pair in pairs {
        let days = match (valid_days.get(pair.lo()), valid_days.get(pair.hi())) {
            (Some(a), Some(b)) => common_days(a, b),
            _ => Vec::new(),
        };
        out.insert(
            pair.clone(),
            pair_encounters(index, pair, &days, threshold_m)?,
        );
    }
    Ok(out)
}

/// Every unordered pair of users present in `valid_days`.
pub fn all_pairs(valid_days: &BTreeMap<UserId, ValidDaySet>) -> BTreeSet<PairKey> {
    let users: Vec<&UserId> = valid_days.keys().collect();
    let mut pairs = BTreeSet::new();
    for (i, a) in users.iter().enumerate() {
        for b in &users[i + 1..] {
            pairs.extend(PairKey::new((*a).clone(), (*b).clone()));
        }
    }
    pairs
}

const ENCOUNTER_COLUMNS: [&str; 5] = ["user_lo", "user_hi", "day", "slot", "cell"];

pub fn write_encounters<'a, W: Write>(
    out: W,
    sets: impl IntoIterator<Item = &'a EncounterSet>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENCOUNTER_COLUMNS)?;
    for set in sets {
        for e in &set.encounters {
            w.write_record([
                e.pair.lo().as_str(),
                e.pair.hi().as_str(),
                &e.day.format(DAY_FORMAT).to_string(),
                &e.slot.to_string(),
                e.cell.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an encounter table back into per-pair sets. Pairs without
/// encounters are not represented in the table and so are absent here.
pub fn read_encounters<R: Read>(source: R) -> Result<BTreeMap<PairKey, EncounterSet>> {
    let mut rdr = table_reader(source);
    expect_header(&mut rdr, &ENCOUNTER_COLUMNS)?;
    let mut out: BTreeMap<PairKey, EncounterSet> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let lo = UserId::new(field(&row, 0)?);
        let hi = UserId::new(field(&row, 1)?);
        if lo >= hi {
            return Err(Error::Schema(format!(
                "pair ({lo}, {hi}) is not in canonical order"
            )));
        }
        let pair = PairKey::new(lo, hi).expect("distinct users");
        let enc = Encounter {
            pair: pair.clone(),
            day: parse_day(&row, 2)?,
            slot: parse_slot(&row, 3)?,
            cell: field(&row, 4)?.parse()?,
        };
        out.entry(pair.clone())
            .or_insert_with(|| EncounterSet::empty(pair))
            .encounters
            .push(enc);
    }
    for set in out.values_mut() {
        set.encounters.sort();
        let before = set.encounters.len();
        set.encounters
            .dedup_by(|a, b| a.day == b.day && a.slot == b.slot);
        if set.encounters.len() != before {
            return Err(Error::Schema(format!(
                "pair {} has two encounters in one slot",
                set.pair
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 4, d).unwrap()
    }

    fn fix(user: &str, d: u32, slot: u16, lat: f64, lon: f64) -> CleanFix {
        CleanFix {
            user: user.into(),
            day: day(d),
            slot: Slot::new(slot).unwrap(),
            lat,
            lon,
            accuracy: 10.0,
        }
    }

    fn valid(users: &[&str], days: std::ops::RangeInclusive<u32>) -> BTreeMap<UserId, ValidDaySet> {
        users
            .iter()
            .map(|u| {
                let user = UserId::new(u);
                (
                    user.clone(),
                    ValidDaySet {
                        user,
                        days: days.clone().map(day).collect(),
                    },
                )
            })
            .collect()
    }

    fn pair(a: &str, b: &str) -> PairKey {
        PairKey::new(a.into(), b.into()).unwrap()
    }

    /// Degrees of latitude spanning `m` meters on the reference sphere.
    fn lat_deg(m: f64) -> f64 {
        (m / crate::geo::EARTH_RADIUS_M).to_degrees()
    }

    #[test]
    fn identical_coordinates_meet() {
        let fixes = [fix("a", 1, 100, 23.0, 72.0), fix("b", 1, 100, 23.0, 72.0)];
        let out = detect_encounters(
            &FixIndex::new(&fixes),
            &valid(&["a", "b"], 1..=1),
            &[pair("a", "b")],
            50.0,
        )
        .unwrap();
        let set = &out[&pair("a", "b")];
        assert_eq!(set.len(), 1);
        assert_eq!(
            set.encounters[0].cell,
            geohash_encode(LatLon::new(23.0, 72.0), 8).unwrap()
        );
    }

    #[test]
    fn threshold_straddle() {
        let near = [
            fix("a", 1, 5, 23.0, 72.0),
            fix("b", 1, 5, 23.0 + lat_deg(10.0), 72.0),
        ];
        let far = [
            fix("a", 1, 5, 23.0, 72.0),
            fix("b", 1, 5, 23.0 + lat_deg(80.0), 72.0),
        ];
        let v = valid(&["a", "b"], 1..=1);
        let p = [pair("a", "b")];
        assert_eq!(
            detect_encounters(&FixIndex::new(&near), &v, &p, 50.0).unwrap()[&p[0]].len(),
            1
        );
        assert_eq!(
            detect_encounters(&FixIndex::new(&far), &v, &p, 50.0).unwrap()[&p[0]].len(),
            0
        );
    }

    #[test]
    fn co_occurrence_needs_both_users() {
        let fixes = [fix("a", 1, 5, 23.0, 72.0), fix("b", 1, 6, 23.0, 72.0)];
        let out = detect_encounters(
            &FixIndex::new(&fixes),
            &valid(&["a", "b"], 1..=1),
            &[pair("a", "b")],
            50.0,
        )
        .unwrap();
        assert!(out[&pair("a", "b")].is_empty());
    }

    #[test]
    fn only_common_days_count() {
        let fixes = [
            fix("a", 1, 5, 23.0, 72.0),
            fix("b", 1, 5, 23.0, 72.0),
            fix("a", 2, 5, 23.0, 72.0),
            fix("b", 2, 5, 23.0, 72.0),
        ];
        let mut v = valid(&["a", "b"], 1..=2);
        v.get_mut(&UserId::new("b")).unwrap().days.remove(&day(1));
        let out = detect_encounters(&FixIndex::new(&fixes), &v, &[pair("a", "b")], 50.0).unwrap();
        let days: Vec<_> = out[&pair("a", "b")]
            .encounters
            .iter()
            .map(|e| e.day)
            .collect();
        assert_eq!(days, [day(2)]);
    }

    #[test]
    fn rejects_non_positive_threshold() {
        let err = detect_encounters(
            &FixIndex::default(),
            &BTreeMap::new(),
            &[pair("a", "b")],
            0.0,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn eligibility_needs_common_days_and_retention() {
        let mut v = valid(&["a", "b", "c"], 1..=7);
        v.get_mut(&UserId::new("c")).unwrap().days.remove(&day(1));
        let survey = vec![
            SurveyRecord {
                rater: "a".into(),
                ratee: "b".into(),
                closeness_raw: 1,
                proximity_raw: 1,
            },
            SurveyRecord {
                rater: "b".into(),
                ratee: "a".into(),
                closeness_raw: 1,
                proximity_raw: 1,
            },
            SurveyRecord {
                rater: "a".into(),
                ratee: "c".into(),
                closeness_raw: 1,
                proximity_raw: 1,
            },
            SurveyRecord {
                rater: "a".into(),
                ratee: "zed".into(),
                closeness_raw: 1,
                proximity_raw: 1,
            },
        ];
        let pairs = eligible_pairs(&survey, &v, 7);
        assert_eq!(pairs.into_iter().collect::<Vec<_>>(), [pair("a", "b")]);
    }

    #[test]
    fn all_pairs_enumerates_combinations() {
        assert_eq!(all_pairs(&valid(&["a", "b", "c", "d"], 1..=1)).len(), 6);
    }

    #[test]
    fn export_round_trip() {
        let fixes = [
            fix("a", 1, 5, 23.0, 72.0),
            fix("b", 1, 5, 23.0, 72.0),
            fix("a", 2, 9, 23.0, 72.0),
            fix("b", 2, 9, 23.0001, 72.0),
        ];
        let out = detect_encounters(
            &FixIndex::new(&fixes),
            &valid(&["a", "b"], 1..=2),
            &[pair("a", "b")],
            50.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_encounters(&mut buf, out.values()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("user_lo,user_hi,day,slot,cell\na,b,2016-04-01,5,"));
        assert_eq!(read_encounters(buf.as_slice()).unwrap(), out);
    }

    fn arb_fixes() -> impl Strategy<Value = Vec<CleanFix>> {
        let row = (0usize..4, 1u32..4, 0u16..12, 0.0..0.002f64, 0.0..0.002f64);
        prop::collection::vec(row, 0..200).prop_map(|rows| {
            let mut seen = BTreeSet::new();
            rows.into_iter()
                .filter(|(u, d, s, _, _)| seen.insert((*u, *d, *s)))
                .map(|(u, d, s, lat, lon)| {
                    fix(["a", "b", "c", "d"][u], d, s, 23.0 + lat, 72.0 + lon)
                })
                .collect()
        })
    }

    fn total(sets: &BTreeMap<PairKey, EncounterSet>) -> usize {
        sets.values().map(EncounterSet::len).sum()
    }

    proptest! {
        #[test]
        fn detection_invariants(fixes in arb_fixes(), d1 in 1.0..150.0f64, extra in 0.0..150.0f64, seed in any::<u64>()) {
            let v = valid(&["a", "b", "c", "d"], 1..=3);
            let pairs = all_pairs(&v);
            let small = detect_encounters(&FixIndex::new(&fixes), &v, &pairs, d1).unwrap();
            let large = detect_encounters(&FixIndex::new(&fixes), &v, &pairs, d1 + extra).unwrap();
            for (p, set) in &small {
                for e in &set.encounters {
                    prop_assert!(large[p].encounters.contains(e));
                }
                let mut keys: Vec<_> = set.encounters.iter().map(|e| (e.day, e.slot)).collect();
                keys.dedup();
                prop_assert_eq!(keys.len(), set.len());
            }

            let mut shuffled = fixes.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let again = detect_encounters(&FixIndex::new(&shuffled), &v, &pairs, d1).unwrap();
            prop_assert_eq!(total(&again), total(&small));
            prop_assert_eq!(&again, &small);

            // Swapping the roles of the two users yields the same canonical set.
            for p in &pairs {
                let swapped = PairKey::new(p.hi().clone(), p.lo().clone()).unwrap();
                let one = detect_encounters(&FixIndex::new(&fixes), &v, [&swapped], d1).unwrap();
                prop_assert_eq!(&one[p], &small[p]);
            }
        }
    }
}
