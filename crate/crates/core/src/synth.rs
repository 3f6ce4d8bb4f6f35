//! Deterministic synthetic trajectories with ground-truth contacts.
//!
//! Stream layout of the generator (ChaCha8 seeded with `seed`, selected with
//! `set_stream`):
//!
//! - stream 0: role assignment (which trajectories are contacts or crossers,
//!   and of which patient);
//! - stream `1 + i`: every draw made while producing trajectory `i`.
//!
//! Trajectories `0..n_patients` are patients. A contact shadows its patient
//! at every point, within a quarter of `theta_d` and `theta_t`, so its
//! infected rate against the patient is at least `e^{-1/4}` for any `lambda`.
//! A crosser follows a random stretch of its patient's path and then walks
//! off on its own; it is not labeled. Everyone else walks independently.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::trajectory::{Location, Mbr, Trajectory, EARTH_RADIUS_M};

const DEG_PER_M: f64 = 180.0 / (std::f64::consts::PI * EARTH_RADIUS_M);

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_traj: usize,
    /// Inclusive range of points per trajectory.
    pub points: (usize, usize),
    pub region: Mbr,
    pub time_start: i64,
    /// Trajectories start within `[time_start, time_start + time_span)`.
    pub time_span: i64,
    /// Inclusive range of seconds between consecutive points.
    pub interval: (i64, i64),
    /// Standard deviation of a step along each axis, meters.
    pub step_sigma: f64,
    pub dwell_prob: f64,
    pub n_patients: usize,
    pub contact_fraction: f64,
    pub crosser_fraction: f64,
    /// Contact ranges the shadows are built for.
    pub theta_d: f64,
    pub theta_t: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_traj: 500,
            points: (10, 28),
            region: Mbr { min_lon: 116.25, min_lat: 39.85, max_lon: 116.45, max_lat: 40.0 },
            time_start: 1_600_000_000 - 1_600_000_000 % 86_400,
            time_span: 14 * 3600,
            interval: (30, 90),
            step_sigma: 40.0,
            dwell_prob: 0.2,
            n_patients: 1,
            contact_fraction: 0.1,
            crosser_fraction: 0.1,
            theta_d: 50.0,
            theta_t: 120.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.n_traj == 0 || self.n_patients == 0 || self.n_patients > self.n_traj {
            return bad(format!("need 1 <= n_patients ({}) <= n_traj ({})", self.n_patients, self.n_traj));
        }
        if self.points.0 < 1 || self.points.0 > self.points.1 {
            return bad(format!("bad points range {:?}", self.points));
        }
        if self.interval.0 < 1 || self.interval.0 > self.interval.1 {
            return bad(format!("bad interval range {:?}", self.interval));
        }
        if self.time_span < 1 || self.step_sigma < 0.0 || !(0.0..=1.0).contains(&self.dwell_prob) {
            return bad("time span, step sigma or dwell probability out of range".into());
        }
        let f = self.contact_fraction + self.crosser_fraction;
        if !(0.0..=1.0).contains(&self.contact_fraction) || !(0.0..=1.0).contains(&self.crosser_fraction) || f > 1.0 {
            return bad(format!("contact and crosser fractions must sum to at most 1, got {f}"));
        }
        if !(self.theta_d > 0.0 && self.theta_t >= 4.0) {
            return bad("theta_d must be positive and theta_t at least 4 s".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Patient,
    Contact(usize),
    Crosser(usize),
    Walker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub trajectories: Vec<Trajectory>,
    pub patients: Vec<String>,
    /// `(patient id, contact id)`, in trajectory order.
    pub contacts: Vec<(String, String)>,
}

fn traj_id(i: usize) -> String {
    format!("t{i:06}")
}

fn round7(x: f64) -> f64 {
    (x * 1e7).round() / 1e7
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn point(cfg: &GenConfig, lon: f64, lat: f64, t: i64) -> Location {
    let r = &cfg.region;
    Location {
        lon: round7(lon.clamp(r.min_lon, r.max_lon)),
        lat: round7(lat.clamp(r.min_lat, r.max_lat)),
        t,
    }
}

fn walk_from(cfg: &GenConfig, rng: &mut ChaCha8Rng, start: Location, n: usize, out: &mut Vec<Location>) {
    let step = Normal::new(0.0, cfg.step_sigma).expect("sigma validated");
    let (mut lon, mut lat, mut t) = (start.lon, start.lat, start.t);
    let cos_lat = lat.to_radians().cos();
    for _ in 0..n {
        t += rng.gen_range(cfg.interval.0..=cfg.interval.1);
        if !rng.gen_bool(cfg.dwell_prob) {
            lon += step.sample(rng) * DEG_PER_M / cos_lat;
            lat += step.sample(rng) * DEG_PER_M;
        }
        let p = point(cfg, lon, lat, t);
        (lon, lat) = (p.lon, p.lat);
        out.push(p);
    }
}

fn random_walk(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<Location> {
    let r = &cfg.region;
    let n = rng.gen_range(cfg.points.0..=cfg.points.1);
    let first = point(
        cfg,
        rng.gen_range(r.min_lon..=r.max_lon),
        rng.gen_range(r.min_lat..=r.max_lat),
        cfg.time_start + rng.gen_range(0..cfg.time_span),
    );
    let mut locs = vec![first];
    walk_from(cfg, rng, first, n - 1, &mut locs);
    locs
}

/// Follows `of` within a quarter of both contact ranges.
fn shadow(cfg: &GenConfig, rng: &mut ChaCha8Rng, of: &[Location]) -> Vec<Location> {
    // Offsets per axis bounded by d / (4 sqrt 2) keep the distance under d / 4.
    let max_off = cfg.theta_d / 4.0 / std::f64::consts::SQRT_2 * 0.99;
    let shift_max = (cfg.theta_t / 8.0).floor() as i64;
    let shift = rng.gen_range(-shift_max..=shift_max);
    // small per-point jitter keeps consecutive points well apart in time
    let jitter = shift_max.min(cfg.interval.0 / 6);
    of.iter()
        .map(|l| {
            let cos_lat = l.lat.to_radians().cos();
            let dx = rng.gen_range(-max_off..=max_off);
            let dy = rng.gen_range(-max_off..=max_off);
            let dt = shift + rng.gen_range(-jitter..=jitter);
            point(cfg, l.lon + dx * DEG_PER_M / cos_lat, l.lat + dy * DEG_PER_M, l.t + dt)
        })
        .collect()
}

/// Shadows a random stretch of `of`, then walks away.
fn crosser(cfg: &GenConfig, rng: &mut ChaCha8Rng, of: &[Location]) -> Vec<Location> {
    let len = rng.gen_range(1..=of.len().div_ceil(2));
    let start = rng.gen_range(0..=of.len() - len);
    let mut locs = shadow(cfg, rng, &of[start..start + len]);
    let last = *locs.iter().max_by_key(|l| l.t).expect("non-empty");
    let extra = rng.gen_range(cfg.points.0..=cfg.points.1).saturating_sub(len).max(1);
    walk_from(cfg, rng, last, extra, &mut locs);
    locs
}

fn assign_roles(cfg: &GenConfig) -> Vec<Role> {
    let mut rng = stream(cfg.seed, 0);
    let rest = cfg.n_traj - cfg.n_patients;
    let n_contacts = ((cfg.contact_fraction * cfg.n_traj as f64).round() as usize).min(rest);
    let n_crossers = ((cfg.crosser_fraction * cfg.n_traj as f64).round() as usize).min(rest - n_contacts);
    let mut others: Vec<usize> = (cfg.n_patients..cfg.n_traj).collect();
    others.shuffle(&mut rng);
    let mut roles = vec![Role::Walker; cfg.n_traj];
    roles[..cfg.n_patients].fill(Role::Patient);
    for (k, &i) in others[..n_contacts].iter().enumerate() {
        roles[i] = Role::Contact(k % cfg.n_patients);
    }
    for (k, &i) in others[n_contacts..n_contacts + n_crossers].iter().enumerate() {
        roles[i] = Role::Crosser(k % cfg.n_patients);
    }
    roles
}

/// Generates the data set described by `cfg`. The same config always yields the same output.
pub fn generate(cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let roles = assign_roles(cfg);
    let patients: Vec<Vec<Location>> =
        (0..cfg.n_patients).map(|i| random_walk(cfg, &mut stream(cfg.seed, 1 + i as u64))).collect();
    let mut trajectories = Vec::with_capacity(cfg.n_traj);
    let mut contacts = Vec::new();
    for (i, role) in roles.iter().enumerate() {
        let mut rng = stream(cfg.seed, 1 + i as u64);
        let locs = match *role {
            Role::Patient => patients[i].clone(),
            Role::Contact(p) => {
                contacts.push((traj_id(p), traj_id(i)));
                shadow(cfg, &mut rng, &patients[p])
            }
            Role::Crosser(p) => crosser(cfg, &mut rng, &patients[p]),
            Role::Walker => random_walk(cfg, &mut rng),
        };
        trajectories.push(Trajectory::new(traj_id(i), locs)?);
    }
    Ok(Generated { trajectories, patients: (0..cfg.n_patients).map(traj_id).collect(), contacts })
}

/// Writes `patient_id,contact_id` lines without a header.
pub fn write_labels<W: Write>(mut w: W, contacts: &[(String, String)]) -> Result<()> {
    for (p, c) in contacts {
        writeln!(w, "{p},{c}")?;
    }
    w.flush()?;
    Ok(())
}
