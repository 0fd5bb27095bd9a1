//! Synthetic traces contrasting schedule-driven and freely social pairs.
//!
//! Every pair gets two dedicated users whose homes lie far from everyone
//! else. On a meeting day both users move to the pair's meeting point for
//! the chosen slots. A *scheduled* pair meets near a few fixed daily anchor
//! slots (± jitter); a *social* pair meets at uniformly random slots. The
//! number of encounters per day has the same distribution for both, so
//! only their placement in the day differs. Scheduled pairs are reported
//! as acquaintances (raw closeness 1) and social pairs as very good friends (5).

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, FixedOffset, NaiveDate, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geo::LatLon;
use crate::ingest::{study_site_offset, RawFix, SurveyRecord};
use crate::preprocess::slot_start;
use crate::types::{PairKey, Slot, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Archetype {
    Scheduled,
    Social,
}

impl Archetype {
    pub fn closeness_raw(self) -> u8 {
        match self {
            Archetype::Scheduled => 1,
            Archetype::Social => 5,
        }
    }

    fn proximity_raw(self) -> u8 {
        match self {
            Archetype::Scheduled => 2,
            Archetype::Social => 4,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Archetype::Scheduled => "sched",
            Archetype::Social => "social",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub pairs_per_archetype: usize,
    pub n_days: u32,
    /// Encounters on each day the pair meets.
    pub encounters_per_day: u32,
    /// Chance that a pair meets on a given day.
    pub meet_probability: f64,
    /// Fixed daily anchor slots per scheduled pair.
    pub schedule_slots: u32,
    /// Scheduled encounters land within this many slots of their anchor.
    pub jitter_slots: u32,
    /// Users log fixes in `active_start..active_end` slots each day.
    pub active_start: u16,
    pub active_end: u16,
    pub first_day: NaiveDate,
    pub utc_offset: FixedOffset,
    pub origin: LatLon,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pairs_per_archetype: 100,
            n_days: 14,
            encounters_per_day: 4,
            meet_probability: 0.75,
            schedule_slots: 3,
            jitter_slots: 2,
            active_start: 96,
            active_end: 240,
            first_day: NaiveDate::from_ymd_opt(2016, 4, 4).unwrap(),
            utc_offset: study_site_offset(),
            origin: LatLon::new(23.188, 72.628),
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn active_len(&self) -> u32 {
        u32::from(self.active_end.saturating_sub(self.active_start))
    }

    fn window(&self) -> u32 {
        2 * self.jitter_slots + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.active_start >= self.active_end || self.active_end > Slot::PER_DAY {
            return Err(Error::config(
                "active slot range must be non-empty and within 0..288",
            ));
        }
        if self.pairs_per_archetype == 0 || self.n_days == 0 {
            return Err(Error::config("need at least one pair and one day"));
        }
        if !(0.0..=1.0).contains(&self.meet_probability) {
            return Err(Error::config("meet probability must lie in [0, 1]"));
        }
        if self.schedule_slots == 0 {
            return Err(Error::config("need at least one schedule slot"));
        }
        if self.encounters_per_day > self.active_len() {
            return Err(Error::config(format!(
                "{} encounters per day exceed the {} active slots",
                self.encounters_per_day,
                self.active_len()
            )));
        }
        let blocks = self.active_len() / self.window();
        if self.schedule_slots > blocks {
            return Err(Error::config(format!(
                "{} anchors with jitter {} do not fit in the active slots",
                self.schedule_slots, self.jitter_slots
            )));
        }
        if self.encounters_per_day > self.schedule_slots * self.window() {
            return Err(Error::config(format!(
                "{} encounters per day exceed the {} slots available around the anchors",
                self.encounters_per_day,
                self.schedule_slots * self.window()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub fixes: Vec<RawFix>,
    pub survey: Vec<SurveyRecord>,
    pub truth: BTreeMap<PairKey, Archetype>,
    /// Slots in which each pair was placed together, by day.
    pub planned: BTreeMap<PairKey, Vec<(NaiveDate, Slot)>>,
}

/// Degrees between neighbouring pairs on the layout grid (about 2.2 km).
const PAIR_SPACING_DEG: f64 = 0.02;
/// Offset of the second user's home and of the meeting point from the first home.
const HOME_OFFSET_DEG: f64 = 0.005;
const MEETING_OFFSET_DEG: f64 = 0.0025;
/// Positional noise, about 3 m.
const NOISE_DEG: f64 = 0.00003;
/// Raw timestamps stray at most this far from their slot start.
const TIME_NOISE_S: i64 = 100;

fn scheduled_slots(rng: &mut ChaCha8Rng, cfg: &SynthConfig, anchors: &[u32]) -> BTreeSet<u32> {
    let j = cfg.jitter_slots;
    let mut used = BTreeSet::new();
    for i in 0..cfg.encounters_per_day as usize {
        let anchor = anchors[i % anchors.len()];
        let own: Vec<u32> = (anchor - j..=anchor + j)
            .filter(|s| !used.contains(s))
            .collect();
        let pool = if own.is_empty() {
            anchors
                .iter()
                .flat_map(|&a| a - j..=a + j)
                .filter(|s| !used.contains(s))
                .collect()
        } else {
            own
        };
        used.insert(pool[rng.gen_range(0..pool.len())]);
    }
    used
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_pairs = 2 * cfg.pairs_per_archetype;
    let grid = (n_pairs as f64).sqrt().ceil() as usize;
    let active_len = cfg.active_len();
    let window = cfg.window();

    let mut fixes = Vec::new();
    let mut survey = Vec::new();
    let mut truth = BTreeMap::new();
    let mut planned = BTreeMap::new();

    for p in 0..n_pairs {
        let archetype = if p < cfg.pairs_per_archetype {
            Archetype::Scheduled
        } else {
            Archetype::Social
        };
        let idx = p % cfg.pairs_per_archetype;
        let a = UserId::new(format!("{}-{idx:03}-a", archetype.tag()));
        let b = UserId::new(format!("{}-{idx:03}-b", archetype.tag()));
        let base = LatLon::new(
            cfg.origin.lat + (p / grid) as f64 * PAIR_SPACING_DEG,
            cfg.origin.lon + (p % grid) as f64 * PAIR_SPACING_DEG,
        );
        let homes = [base, LatLon::new(base.lat + HOME_OFFSET_DEG, base.lon)];
        let meeting = LatLon::new(base.lat + MEETING_OFFSET_DEG, base.lon + MEETING_OFFSET_DEG);

        let anchors: Vec<u32> = {
            let blocks = (active_len / window) as usize;
            let mut chosen: Vec<usize> =
                sample(&mut rng, blocks, cfg.schedule_slots as usize).into_vec();
            chosen.sort_unstable();
            chosen
                .into_iter()
                .map(|blk| u32::from(cfg.active_start) + blk as u32 * window + cfg.jitter_slots)
                .collect()
        };

        let mut together = Vec::new();
        for d in 0..cfg.n_days {
            let day = cfg.first_day + Duration::days(i64::from(d));
            let meet_today = rng.gen_bool(cfg.meet_probability);
            let slots: BTreeSet<u32> = if !meet_today {
                BTreeSet::new()
            } else {
                match archetype {
                    Archetype::Scheduled => scheduled_slots(&mut rng, cfg, &anchors),
                    Archetype::Social => sample(
                        &mut rng,
                        active_len as usize,
                        cfg.encounters_per_day as usize,
                    )
                    .into_iter()
                    .map(|i| u32::from(cfg.active_start) + i as u32)
                    .collect(),
                }
            };
            together.extend(slots.iter().map(|&s| (day, Slot::new(s as u16).unwrap())));

            for (user, home) in [(&a, homes[0]), (&b, homes[1])] {
                for s in cfg.active_start..cfg.active_end {
                    let slot = Slot::new(s).unwrap();
                    let at = if slots.contains(&u32::from(s)) {
                        meeting
                    } else {
                        home
                    };
                    let local = slot_start(day, slot)
                        + Duration::seconds(rng.gen_range(-TIME_NOISE_S..=TIME_NOISE_S));
                    let timestamp = cfg
                        .utc_offset
                        .from_local_datetime(&local)
                        .single()
                        .expect("fixed offsets are unambiguous")
                        .with_timezone(&Utc);
                    fixes.push(RawFix {
                        user: user.clone(),
                        timestamp,
                        lat: at.lat + rng.gen_range(-NOISE_DEG..=NOISE_DEG),
                        lon: at.lon + rng.gen_range(-NOISE_DEG..=NOISE_DEG),
                        elevation: None,
                        accuracy: (rng.gen_range(5.0..45.0f64) * 10.0).round() / 10.0,
                        satellites: None,
                        provider: None,
                    });
                }
            }
        }

        for (rater, ratee) in [(&a, &b), (&b, &a)] {
            survey.push(SurveyRecord {
                rater: rater.clone(),
                ratee: ratee.clone(),
                closeness_raw: archetype.closeness_raw(),
                proximity_raw: archetype.proximity_raw(),
            });
        }
        let key = PairKey::new(a, b).expect("distinct users");
        truth.insert(key.clone(), archetype);
        planned.insert(key, together);
    }

    Ok(SynthData {
        fixes,
        survey,
        truth,
        planned,
    })
}
