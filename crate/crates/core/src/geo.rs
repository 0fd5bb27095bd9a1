//! Great-circle distance and geohash cells.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";
pub const MAX_GEOHASH_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    /// Arithmetic mean of the coordinates. Only meaningful at small separations,
    /// which is all encounter detection ever asks of it.
    pub fn midpoint(self, other: LatLon) -> LatLon {
        LatLon::new((self.lat + other.lat) / 2.0, (self.lon + other.lon) / 2.0)
    }
}

/// Haversine distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// A validated geohash string of 1 to 12 base-32 characters.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GeohashCell(String);

impl GeohashCell {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Latitude and longitude bounds of the cell as `(lat_min, lat_max, lon_min, lon_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
        let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
        let mut even = true;
        for byte in self.0.bytes() {
            let idx = symbol_index(byte).expect("validated on construction");
            for shift in (0..5).rev() {
                let bit = (idx >> shift) & 1 == 1;
                let (lo, hi) = if even {
                    (&mut lon_lo, &mut lon_hi)
                } else {
                    (&mut lat_lo, &mut lat_hi)
                };
                let mid = (*lo + *hi) / 2.0;
                if bit {
                    *lo = mid;
                } else {
                    *hi = mid;
                }
                even = !even;
            }
        }
        (lat_lo, lat_hi, lon_lo, lon_hi)
    }

    pub fn contains(&self, p: LatLon) -> bool {
        let (lat_lo, lat_hi, lon_lo, lon_hi) = self.bounds();
        (lat_lo..=lat_hi).contains(&p.lat) && (lon_lo..=lon_hi).contains(&p.lon)
    }
}

fn symbol_index(byte: u8) -> Option<u8> {
    BASE32.iter().position(|&c| c == byte).map(|i| i as u8)
}

impl fmt::Display for GeohashCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for GeohashCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GeohashCell({})", self.0)
    }
}

impl FromStr for GeohashCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > MAX_GEOHASH_LEN {
            return Err(Error::domain(format!(
                "geohash length {} not in 1..=12",
                s.len()
            )));
        }
        if let Some(bad) = s.bytes().find(|&b| symbol_index(b).is_none()) {
            return Err(Error::domain(format!(
                "'{}' is not a geohash symbol",
                bad as char
            )));
        }
        Ok(GeohashCell(s.to_owned()))
    }
}

/// Interleaved-bisection geohash, longitude bit first, five bits per symbol.
/// A coordinate exactly on a bisection line goes to the upper half.
pub fn geohash_encode(p: LatLon, length: usize) -> Result<GeohashCell> {
    if !(1..=MAX_GEOHASH_LEN).contains(&length) {
        return Err(Error::domain(format!(
            "geohash length {length} not in 1..=12"
        )));
    }
    if !(-90.0..=90.0).contains(&p.lat) || !(-180.0..=180.0).contains(&p.lon) {
        return Err(Error::domain(format!(
            "coordinate ({}, {}) out of range",
            p.lat, p.lon
        )));
    }
    let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
    let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
    let mut code = String::with_capacity(length);
    let mut even = true;
    while code.len() < length {
        let mut idx = 0u8;
        for _ in 0..5 {
            let (value, lo, hi) = if even {
                (p.lon, &mut lon_lo, &mut lon_hi)
            } else {
                (p.lat, &mut lat_lo, &mut lat_hi)
            };
            let mid = (*lo + *hi) / 2.0;
            idx <<= 1;
            if value >= mid {
                idx |= 1;
                *lo = mid;
            } else {
                *hi = mid;
            }
            even = !even;
        }
        code.push(BASE32[idx as usize] as char);
    }
    Ok(GeohashCell(code))
}
