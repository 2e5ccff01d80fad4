//! Periodic stirring protocols for three round stirrers in the unit disk.
//!
//! Stirrers sit on three fixed *sites* (the initial centers). Sites are
//! numbered as slots 1..3 in order of increasing x. A braid letter `σ_i^{±1}`
//! becomes a swap of whatever stirrers occupy slots `i` and `i + 1`: both move
//! along half circles about the midpoint of the two sites. `σ_i` turns
//! counterclockwise, `σ_i⁻¹` clockwise, so for `σ_i` the strand coming from
//! the left passes below (smaller y).
//!
//! Each swap follows the angle profile `θ(s) = π (s − sin(2πs) / 2π)`, whose
//! derivative vanishes at both ends; concatenated moves are C¹.
//!
//! Stirrer *identities* (indices into [`StirrerConfig::centers`]) are tracked
//! separately from slots, which gives the period permutation σ with
//! `α_i(t + T) = α_σ(i)(t)`.

use alloc::vec::Vec;

use thiserror::Error;

use crate::braid::{BraidWord, Letter};
use crate::geom::{cos, sin, Point, Vec2, PI, TAU};

/// Required slack beyond contact, both between stirrers and to the wall.
pub const CLEARANCE_MARGIN: f64 = 1e-2;

/// Outer boundary radius; fixed.
pub const OUTER_RADIUS: f64 = 1.0;

const TIE_TOLERANCE: f64 = 1e-12;
const MAX_REFINE_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("stirrer radius {0} must lie in (0, 1/8)")]
    BadRadius(f64),
    #[error("stirrers {0} and {1} are closer than 2ε + margin")]
    StirrersOverlap(usize, usize),
    #[error("stirrer {0} is closer than ε + margin to the outer wall")]
    StirrerTouchesWall(usize),
    #[error("move {0} has non-positive or non-finite duration")]
    BadDuration(usize),
    #[error("move {0} swaps slot {1}; slots must be 1 or 2")]
    BadSlot(usize, u8),
    #[error("rate must be positive and finite")]
    BadRate,
    #[error("projection is degenerate near t = {0}")]
    DegenerateProjection(f64),
}

/// Stirrer radius and initial centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirrerConfig {
    pub epsilon: f64,
    pub centers: [Point; 3],
}

impl Default for StirrerConfig {
    fn default() -> Self {
        StirrerConfig {
            epsilon: 0.05,
            centers: [
                Vec2::new(-0.5, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(0.5, 0.0),
            ],
        }
    }
}

impl StirrerConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        StirrerConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps < 0.125) {
            return Err(ProtocolError::BadRadius(eps));
        }
        for i in 0..3 {
            if self.centers[i].norm() > OUTER_RADIUS - eps - CLEARANCE_MARGIN {
                return Err(ProtocolError::StirrerTouchesWall(i));
            }
            for j in i + 1..3 {
                if self.centers[i].distance(self.centers[j]) < 2.0 * eps + CLEARANCE_MARGIN {
                    return Err(ProtocolError::StirrersOverlap(i, j));
                }
            }
        }
        Ok(())
    }

    /// Fluid area `π (1 − 3ε²)`.
    pub fn fluid_area(&self) -> f64 {
        PI * (OUTER_RADIUS * OUTER_RADIUS - 3.0 * self.epsilon * self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    Ccw,
    Cw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    /// Interchange the stirrers in slots `slot` and `slot + 1`.
    Swap {
        slot: u8,
        handedness: Handedness,
        duration: f64,
    },
    Hold {
        duration: f64,
    },
}

impl Move {
    pub fn duration(&self) -> f64 {
        match *self {
            Move::Swap { duration, .. } | Move::Hold { duration } => duration,
        }
    }

    pub fn from_letter(letter: Letter, duration: f64) -> Move {
        Move::Swap {
            slot: letter.generator(),
            handedness: if letter.is_inverse() {
                Handedness::Cw
            } else {
                Handedness::Ccw
            },
            duration,
        }
    }
}

/// Swap angle profile and its derivative in the normalized time `s ∈ [0, 1]`.
#[inline]
pub fn swap_angle(s: f64) -> (f64, f64) {
    let theta = PI * (s - sin(TAU * s) / TAU);
    let dtheta = PI * (1.0 - cos(TAU * s));
    (theta, dtheta)
}

/// Permutation of stirrer identities, `perm[i]` = image of `i`.
pub type Permutation = [usize; 3];

const IDENTITY_PERM: Permutation = [0, 1, 2];

fn compose(p: &Permutation, q: &Permutation) -> Permutation {
    // (p ∘ q)(i) = p(q(i))
    [p[q[0]], p[q[1]], p[q[2]]]
}

fn perm_power(p: &Permutation, k: i64) -> Permutation {
    // Every element of S3 has order dividing 6.
    let mut out = IDENTITY_PERM;
    for _ in 0..k.rem_euclid(6) {
        out = compose(p, &out);
    }
    out
}

/// Order of a permutation of three items (1, 2 or 3).
pub fn permutation_order(p: &Permutation) -> usize {
    let mut q = *p;
    let mut n = 1;
    while q != IDENTITY_PERM {
        q = compose(p, &q);
        n += 1;
    }
    n
}

#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    mv: Move,
    /// `occupant[site]` = stirrer identity at the start of the move.
    occupant: [usize; 3],
}

/// A T-periodic stirring protocol. Immutable once built.
#[derive(Debug, Clone)]
pub struct StirringProtocol {
    config: StirrerConfig,
    moves: Vec<Move>,
    segments: Vec<Segment>,
    /// Site positions in slot order.
    sites: [Point; 3],
    period: f64,
    permutation: Permutation,
}

impl StirringProtocol {
    /// Assembles a protocol from explicit moves. Only structural checks are
    /// made here; geometric admissibility is reported by [`validate`].
    pub fn from_moves(config: StirrerConfig, moves: Vec<Move>) -> Result<Self, ProtocolError> {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| {
            let (a, b) = (config.centers[i], config.centers[j]);
            a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
        });
        let sites = [
            config.centers[order[0]],
            config.centers[order[1]],
            config.centers[order[2]],
        ];
        let mut occupant = order;

        let mut segments = Vec::with_capacity(moves.len());
        let mut t = 0.0;
        for (k, mv) in moves.iter().enumerate() {
            let d = mv.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(ProtocolError::BadDuration(k));
            }
            segments.push(Segment {
                start: t,
                mv: *mv,
                occupant,
            });
            if let Move::Swap { slot, .. } = *mv {
                if slot != 1 && slot != 2 {
                    return Err(ProtocolError::BadSlot(k, slot));
                }
                occupant.swap(slot as usize - 1, slot as usize);
            }
            t += d;
        }
        if segments.is_empty() {
            return Err(ProtocolError::BadDuration(0));
        }

        // α_i(T) sits on the site first occupied by σ(i).
        let mut permutation = [0usize; 3];
        for site in 0..3 {
            permutation[occupant[site]] = order[site];
        }

        Ok(StirringProtocol {
            config,
            moves,
            segments,
            sites,
            period: t,
            permutation,
        })
    }

    pub fn hold(config: StirrerConfig, duration: f64) -> Result<Self, ProtocolError> {
        Self::from_moves(config, alloc::vec![Move::Hold { duration }])
    }

    pub fn config(&self) -> &StirrerConfig {
        &self.config
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    /// σ with `α_i(t + T) = α_σ(i)(t)`.
    pub fn permutation(&self) -> Permutation {
        self.permutation
    }

    /// Start times of every move, then `T`.
    pub fn junctions(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        v.push(self.period);
        v
    }

    /// The braid word this protocol was built from (swaps only).
    pub fn word(&self) -> BraidWord {
        self.moves
            .iter()
            .filter_map(|m| match *m {
                Move::Swap {
                    slot, handedness, ..
                } => Some(Letter::new(slot, handedness == Handedness::Cw).unwrap()),
                Move::Hold { .. } => None,
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// Whether the stirrers move at all.
    pub fn is_stationary(&self) -> bool {
        self.moves.iter().all(|m| matches!(m, Move::Hold { .. }))
    }

    /// Splits `t` into a period count and a phase in `[0, T)`.
    pub fn split_time(&self, t: f64) -> (i64, f64) {
        let k = libm::floor(t / self.period);
        let mut s = t - k * self.period;
        let mut k = k as i64;
        if s >= self.period {
            s -= self.period;
            k += 1;
        }
        if s < 0.0 {
            s = 0.0;
        }
        (k, s)
    }

    fn segment_at(&self, s: f64) -> &Segment {
        let idx = self.segments.partition_point(|seg| seg.start <= s);
        &self.segments[idx.saturating_sub(1)]
    }

    /// Positions and velocities at phase `s ∈ [0, T]`, indexed by identity.
    fn state_in_period(&self, s: f64) -> ([Point; 3], [Vec2; 3]) {
        self.state_on_segment(self.segment_at(s), s)
    }

    fn state_on_segment(&self, seg: &Segment, s: f64) -> ([Point; 3], [Vec2; 3]) {
        let mut pos = [Vec2::ZERO; 3];
        let mut vel = [Vec2::ZERO; 3];
        for site in 0..3 {
            pos[seg.occupant[site]] = self.sites[site];
        }
        if let Move::Swap {
            slot,
            handedness,
            duration,
        } = seg.mv
        {
            let u = ((s - seg.start) / duration).clamp(0.0, 1.0);
            let (theta, dtheta) = swap_angle(u);
            let sign = match handedness {
                Handedness::Ccw => 1.0,
                Handedness::Cw => -1.0,
            };
            let (left, right) = (slot as usize - 1, slot as usize);
            let mid = self.sites[left].midpoint(self.sites[right]);
            let omega = sign * dtheta / duration;
            for site in [left, right] {
                let r = self.sites[site] - mid;
                let rr = r.rotated(sign * theta);
                pos[seg.occupant[site]] = mid + rr;
                vel[seg.occupant[site]] = rr.perp() * omega;
            }
        }
        (pos, vel)
    }

    fn relabel<T: Copy>(&self, k: i64, by_identity: [T; 3]) -> [T; 3] {
        if k == 0 {
            return by_identity;
        }
        let p = perm_power(&self.permutation, k);
        [by_identity[p[0]], by_identity[p[1]], by_identity[p[2]]]
    }

    /// Stirrer centers `α_i(t)`, any real `t`.
    pub fn positions(&self, t: f64) -> [Point; 3] {
        let (k, s) = self.split_time(t);
        self.relabel(k, self.state_in_period(s).0)
    }

    /// Stirrer velocities `α̇_i(t)`.
    pub fn velocities(&self, t: f64) -> [Vec2; 3] {
        let (k, s) = self.split_time(t);
        self.relabel(k, self.state_in_period(s).1)
    }

    pub fn state(&self, t: f64) -> ([Point; 3], [Vec2; 3]) {
        let (k, s) = self.split_time(t);
        let (p, v) = self.state_in_period(s);
        (self.relabel(k, p), self.relabel(k, v))
    }

    /// Sampled geometric admissibility check. `samples_per_move` is raised to
    /// at least 100.
    pub fn validate(&self, samples_per_move: usize) -> AdmissibilityReport {
        validate(self, samples_per_move)
    }

    pub fn extract_braid(&self, samples: usize) -> Result<BraidWord, ProtocolError> {
        extract_braid(self, samples, 0.0)
    }
}

/// `build_protocol` with one time unit per letter.
pub fn build_protocol(
    word: &BraidWord,
    config: StirrerConfig,
    moves_per_unit_time: f64,
) -> Result<StirringProtocol, ProtocolError> {
    if !(moves_per_unit_time > 0.0 && moves_per_unit_time.is_finite()) {
        return Err(ProtocolError::BadRate);
    }
    config.validate()?;
    let duration = 1.0 / moves_per_unit_time;
    let moves = if word.is_empty() {
        alloc::vec![Move::Hold { duration }]
    } else {
        word.letters()
            .iter()
            .map(|&l| Move::from_letter(l, duration))
            .collect()
    };
    StirringProtocol::from_moves(config, moves)
}

/// Outcome of [`validate`]. Gaps are measured beyond contact: a positive
/// `min_pair_gap` means no two stirrers touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub config_ok: bool,
    /// min over samples and pairs of `|α_i − α_j| − 2ε`.
    pub min_pair_gap: f64,
    /// min over samples of `1 − |α_i| − ε`.
    pub min_wall_clearance: f64,
    pub max_velocity_jump: f64,
    /// Set distance between the centers at `T` and at `0`.
    pub closure_error: f64,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.config_ok
            && self.min_pair_gap > 0.0
            && self.min_wall_clearance > 0.0
            && self.max_velocity_jump < 1e-9
            && self.closure_error < 1e-12
    }
}

pub fn validate(p: &StirringProtocol, samples_per_move: usize) -> AdmissibilityReport {
    let n = samples_per_move.max(100);
    let eps = p.config.epsilon;
    let mut min_pair_gap = f64::INFINITY;
    let mut min_wall_clearance = f64::INFINITY;
    for seg in &p.segments {
        let d = seg.mv.duration();
        for j in 0..=n {
            let s = seg.start + d * j as f64 / n as f64;
            let (pos, _) = p.state_in_period(s.min(p.period));
            for i in 0..3 {
                min_wall_clearance = min_wall_clearance.min(OUTER_RADIUS - pos[i].norm() - eps);
                for k in i + 1..3 {
                    min_pair_gap = min_pair_gap.min(pos[i].distance(pos[k]) - 2.0 * eps);
                }
            }
        }
    }

    // Velocity on either side of each junction; the last one wraps with σ.
    let mut max_velocity_jump: f64 = 0.0;
    for (k, seg) in p.segments.iter().enumerate() {
        let end = seg.start + seg.mv.duration();
        let (_, before) = p.state_on_segment(seg, end);
        let after = match p.segments.get(k + 1) {
            Some(next) => p.state_on_segment(next, next.start).1,
            None => p.velocities(p.period),
        };
        for i in 0..3 {
            max_velocity_jump = max_velocity_jump.max((before[i] - after[i]).norm());
        }
    }

    let (end_pos, _) = p.state_in_period(p.period);
    let start_pos = p.state_in_period(0.0).0;
    let closure_error = set_distance(&end_pos, &start_pos);

    AdmissibilityReport {
        config_ok: p.config.validate().is_ok(),
        min_pair_gap,
        min_wall_clearance,
        max_velocity_jump,
        closure_error,
    }
}

/// Minimum over matchings of the maximum pointwise distance.
pub fn set_distance(a: &[Point; 3], b: &[Point; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    PERMS
        .iter()
        .map(|q| (0..3).map(|i| a[i].distance(b[q[i]])).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

struct Projector<'a> {
    p: &'a StirringProtocol,
    axis: Vec2,
}

impl Projector<'_> {
    fn coords(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let pos = self.p.positions(t);
        let depth_axis = self.axis.perp();
        (
            pos.map(|q| q.dot(self.axis)),
            pos.map(|q| q.dot(depth_axis)),
        )
    }

    /// Identities in increasing projected order, or `None` on a near tie.
    fn order(&self, t: f64) -> Option<[usize; 3]> {
        let (x, _) = self.coords(t);
        let mut ids = [0usize, 1, 2];
        ids.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if x[ids[1]] - x[ids[0]] < TIE_TOLERANCE * scale
            || x[ids[2]] - x[ids[1]] < TIE_TOLERANCE * scale
        {
            None
        } else {
            Some(ids)
        }
    }

    /// Order at `t`, nudging `t` towards `toward` if it sits on a tie.
    fn settled_order(&self, t: f64, toward: f64) -> Result<(f64, [usize; 3]), ProtocolError> {
        let mut tt = t;
        let mut h = (toward - t) * 1e-6;
        for _ in 0..20 {
            if let Some(o) = self.order(tt) {
                return Ok((tt, o));
            }
            tt = t + h;
            h *= 4.0;
        }
        Err(ProtocolError::DegenerateProjection(t))
    }

    fn crossing_letter(&self, a: f64, b: f64, left: usize, right: usize, slot: usize) -> Letter {
        // Bisect for the time where the two projected coordinates meet.
        let (mut lo, mut hi) = (a, b);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let (x, _) = self.coords(mid);
            if x[left] < x[right] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (_, depth) = self.coords(0.5 * (lo + hi));
        // Positive crossing: the strand coming from the left passes behind.
        Letter::new(slot as u8 + 1, depth[left] >= depth[right]).unwrap()
    }

    fn scan(
        &self,
        a: f64,
        oa: [usize; 3],
        b: f64,
        ob: [usize; 3],
        level: u32,
        out: &mut Vec<Letter>,
    ) -> Result<(), ProtocolError> {
        if oa == ob {
            return Ok(());
        }
        for slot in 0..2 {
            let mut swapped = oa;
            swapped.swap(slot, slot + 1);
            if swapped == ob {
                out.push(self.crossing_letter(a, b, oa[slot], oa[slot + 1], slot));
                return Ok(());
            }
        }
        if level >= MAX_REFINE_DEPTH {
            return Err(ProtocolError::DegenerateProjection(a));
        }
        let (m, om) = self.settled_order(0.5 * (a + b), b)?;
        self.scan(a, oa, m, om, level + 1, out)?;
        self.scan(m, om, b, ob, level + 1, out)
    }
}

/// Reads the braid off the x-projection of the stirrer world-lines over one
/// period. `axis_angle` rotates the projection direction (radians).
pub fn extract_braid(
    p: &StirringProtocol,
    samples: usize,
    axis_angle: f64,
) -> Result<BraidWord, ProtocolError> {
    let proj = Projector {
        p,
        axis: Vec2::new(cos(axis_angle), sin(axis_angle)),
    };
    let n = samples.max(2);
    let big_t = p.period;
    // Interior samples are offset so they do not land on swap midpoints.
    let offset = 0.381_966_011_250_105;
    let mut times: Vec<f64> = Vec::with_capacity(n + 1);
    times.push(0.0);
    for j in 1..n {
        times.push(big_t * (j as f64 - offset) / (n as f64 - 1.0));
    }
    times.push(big_t);

    let mut letters = Vec::new();
    let (mut ta, mut oa) = proj.settled_order(times[0], times[1])?;
    for w in times.windows(2) {
        let toward = if w[1] >= big_t { w[0] } else { big_t };
        let (tb, ob) = proj.settled_order(w[1], toward)?;
        proj.scan(ta, oa, tb, ob, 0, &mut letters)?;
        ta = tb;
        oa = ob;
    }
    Ok(letters.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braid::parse_braid;

    fn canonical(word: &str) -> StirringProtocol {
        build_protocol(&parse_braid(word).unwrap(), StirrerConfig::default(), 1.0).unwrap()
    }

    #[test]
    fn hold_keeps_centers_fixed() {
        let p = canonical("");
        assert_eq!(p.period(), 1.0);
        for t in [0.0, 0.3, 1.7, -2.2] {
            assert_eq!(p.positions(t), StirrerConfig::default().centers);
            assert_eq!(p.velocities(t), [Vec2::ZERO; 3]);
        }
    }

    #[test]
    fn half_swap_puts_pair_on_vertical_diameter() {
        let p = canonical("1");
        let pos = p.positions(0.5);
        assert!((pos[0] - Vec2::new(-0.25, -0.25)).norm() < 1e-15);
        assert!((pos[1] - Vec2::new(-0.25, 0.25)).norm() < 1e-15);
        assert_eq!(pos[2], Vec2::new(0.5, 0.0));
    }

    #[test]
    fn full_swap_exchanges_pair() {
        let p = canonical("1");
        let pos = p.positions(1.0 - 1e-15);
        assert!((pos[0] - Vec2::new(0.0, 0.0)).norm() < 1e-12);
        assert!((pos[1] - Vec2::new(-0.5, 0.0)).norm() < 1e-12);
        assert_eq!(p.permutation(), [1, 0, 2]);
    }

    #[test]
    fn mid_swap_speed() {
        let p = canonical("1");
        let v = p.velocities(0.5);
        // r θ'(1/2) / d with r = 1/4, θ'(1/2) = 2π.
        assert!((v[0].norm() - 0.25 * TAU).abs() < 1e-13);
        assert!((v[0] + v[1]).norm() < 1e-13);
        assert_eq!(p.velocities(0.0), [Vec2::ZERO; 3]);
    }

    #[test]
    fn periodic_relabeling() {
        let p = canonical("1 -2");
        let sigma = p.permutation();
        for t in [0.1, 0.77, 1.3, 1.95] {
            let now = p.positions(t);
            let later = p.positions(t + p.period());
            for i in 0..3 {
                assert!((later[i] - now[sigma[i]]).norm() < 1e-12);
            }
        }
        assert_eq!(permutation_order(&sigma), 3);
    }

    #[test]
    fn validation_examples() {
        let r = canonical("1 -2").validate(200);
        assert!(r.passed(), "{r:?}");
        let hold = canonical("").validate(100);
        assert!(hold.passed());
        assert!((hold.min_pair_gap - 0.4).abs() < 1e-12);
        let wide = StirringProtocol::from_moves(
            StirrerConfig::with_epsilon(0.3),
            alloc::vec![Move::Hold { duration: 1.0 }],
        )
        .unwrap();
        assert!(!wide.validate(100).passed());
        assert!(
            build_protocol(&BraidWord::empty(), StirrerConfig::with_epsilon(0.3), 1.0).is_err()
        );
    }

    #[test]
    fn extracts_canonical_words() {
        for s in ["1", "1 -2", "1 -2 1", "", "-1 -1 2"] {
            let w = parse_braid(s).unwrap();
            let p = canonical(s);
            assert_eq!(p.extract_braid(64).unwrap(), w, "{s}");
        }
    }
}
