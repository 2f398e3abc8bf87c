//! Minimum-energy power and RB allocation for one communication interval.
//!
//! For a per-slot water level `L`, every active RB receives `L - iota` power
//! and contributes `log2(L / iota)` expected rate. Which RBs are active is
//! decided by a b-matching on the weights `(L - iota) - L ln(L / iota)`.
//! Each slot's level is clipped at the cap where its power hits the budget,
//! and a single global level is bisected until the interval delivers the
//! target rate.
//!
//! Slot power and rate jump where the optimal assignment switches. At such a
//! critical level the two one-sided assignments are blended with a weight
//! `xi`, which makes both functions continuous and lets the bisection land
//! exactly on the target. The blended solution is the relaxed optimum; the
//! exported plan is binary and re-water-filled on fixed assignments.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::matching::{
    limit_assignments, min_cost_b_matching, AssignmentProblem, BinaryAssignment,
};

/// Power and rate of one RB at water level `level` over floor `iota`.
#[inline]
pub fn water_fill(level: f64, iota: f64) -> (f64, f64) {
    if level > iota {
        (level - iota, (level / iota).log2())
    } else {
        (0.0, 0.0)
    }
}

/// Matching weight `p - ln2 * L * rate`; zero when the RB is below its floor.
#[inline]
pub fn waterfill_weight(level: f64, iota: f64) -> f64 {
    if level > iota {
        (level - iota) - level * (level / iota).ln()
    } else {
        0.0
    }
}

/// Assignment problem of slot `t` (0-based) at water level `level`.
pub fn slot_problem(
    profile: &ChannelProfile,
    t: usize,
    level: f64,
    rb_cap: usize,
) -> AssignmentProblem {
    let weights = profile
        .slot_iota(t)
        .iter()
        .map(|&i| waterfill_weight(level, i))
        .collect();
    AssignmentProblem::new(profile.num_bs, profile.num_rb, weights, rb_cap)
}

/// Total power and rate of a fixed assignment in slot `t` at `level`.
pub fn slot_power_rate(
    profile: &ChannelProfile,
    t: usize,
    a: &BinaryAssignment,
    level: f64,
) -> (f64, f64) {
    let iota = profile.slot_iota(t);
    a.pairs().fold((0.0, 0.0), |(p, r), (n, k)| {
        let (dp, dr) = water_fill(level, iota[n * profile.num_rb + k]);
        (p + dp, r + dr)
    })
}

fn slot_extended(
    profile: &ChannelProfile,
    t: usize,
    level: f64,
    mix: f64,
    rb_cap: usize,
) -> (f64, f64) {
    let (lo, hi) = limit_assignments(level, |l| slot_problem(profile, t, l, rb_cap));
    let (p0, r0) = slot_power_rate(profile, t, &lo, level);
    let (p1, r1) = slot_power_rate(profile, t, &hi, level);
    ((1.0 - mix) * p0 + mix * p1, (1.0 - mix) * r0 + mix * r1)
}

/// Blend of the slot power under the left and right limit assignments.
pub fn slot_extended_power(
    profile: &ChannelProfile,
    t: usize,
    level: f64,
    mix: f64,
    rb_cap: usize,
) -> f64 {
    slot_extended(profile, t, level, mix, rb_cap).0
}

/// Blend of the slot rate under the left and right limit assignments.
pub fn slot_extended_rate(
    profile: &ChannelProfile,
    t: usize,
    level: f64,
    mix: f64,
    rb_cap: usize,
) -> f64 {
    slot_extended(profile, t, level, mix, rb_cap).1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Rate tolerance relative to the target.
    pub rate: f64,
    /// Power tolerance relative to the budget.
    pub power: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rate: 1e-6,
            power: 1e-9,
            max_iter: 200,
        }
    }
}

/// Slot configuration: level plus a blend of two assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub level: f64,
    pub minus: BinaryAssignment,
    pub plus: BinaryAssignment,
    pub mix: f64,
    p_minus: f64,
    p_plus: f64,
    r_minus: f64,
    r_plus: f64,
}

impl SlotState {
    fn new(
        profile: &ChannelProfile,
        t: usize,
        level: f64,
        minus: BinaryAssignment,
        plus: BinaryAssignment,
        mix: f64,
    ) -> Self {
        let (p_minus, r_minus) = slot_power_rate(profile, t, &minus, level);
        let (p_plus, r_plus) = if plus == minus {
            (p_minus, r_minus)
        } else {
            slot_power_rate(profile, t, &plus, level)
        };
        Self {
            level,
            minus,
            plus,
            mix,
            p_minus,
            p_plus,
            r_minus,
            r_plus,
        }
    }

    fn single(profile: &ChannelProfile, t: usize, level: f64, a: BinaryAssignment) -> Self {
        Self::new(profile, t, level, a.clone(), a, 0.0)
    }

    pub fn power_at(&self, mix: f64) -> f64 {
        (1.0 - mix) * self.p_minus + mix * self.p_plus
    }

    pub fn rate_at(&self, mix: f64) -> f64 {
        (1.0 - mix) * self.r_minus + mix * self.r_plus
    }

    pub fn power(&self) -> f64 {
        self.power_at(self.mix)
    }

    pub fn rate(&self) -> f64 {
        self.rate_at(self.mix)
    }

    fn with_mix(&self, mix: f64) -> Self {
        Self {
            mix,
            ..self.clone()
        }
    }
}

/// Per-slot power cap: the smallest (level, mix) whose blended power equals
/// the budget. `mix` is zero unless the cap sits on a critical level.
pub type SlotCap = SlotState;

/// Level `L` on a fixed set of floors where `sum [L - iota]+ = budget`.
fn fixed_cap_level(iotas: &mut [f64], budget: f64) -> f64 {
    iotas.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut level = f64::INFINITY;
    for (m, &i) in iotas.iter().enumerate() {
        sum += i;
        let l = (budget + sum) / (m + 1) as f64;
        if m + 1 == iotas.len() || l <= iotas[m + 1] {
            level = l;
            break;
        }
    }
    level
}

/// Cap of slot `t` (0-based) under per-BS RB limit `rb_cap`.
pub fn solve_slot_cap(
    profile: &ChannelProfile,
    t: usize,
    rb_cap: usize,
    power_cap: f64,
    tol: &Tolerances,
) -> SlotCap {
    let eval = |l: f64| {
        let a = min_cost_b_matching(&slot_problem(profile, t, l, rb_cap));
        let p = slot_power_rate(profile, t, &a, l).0;
        (a, p)
    };
    let floor = profile
        .slot_iota(t)
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut lo = floor;
    let mut a_lo = BinaryAssignment::empty(profile.num_bs, profile.num_rb);
    let mut hi = floor + power_cap;
    let (mut a_hi, mut p_hi) = eval(hi);
    while p_hi < power_cap {
        lo = hi;
        a_lo = a_hi;
        hi = floor + 2.0 * (hi - floor);
        (a_hi, p_hi) = eval(hi);
    }
    let tol_p = tol.power * power_cap;
    for _ in 0..tol.max_iter {
        if p_hi - power_cap <= tol_p || hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (a, p) = eval(mid);
        if p >= power_cap {
            (hi, a_hi, p_hi) = (mid, a, p);
        } else {
            (lo, a_lo) = (mid, a);
        }
    }
    if p_hi - power_cap <= tol_p {
        // Same assignment on both sides: the cap level has a closed form.
        let iota = profile.slot_iota(t);
        let mut floors: Vec<f64> = a_hi
            .pairs()
            .map(|(n, k)| iota[n * profile.num_rb + k])
            .collect();
        let exact = fixed_cap_level(&mut floors, power_cap);
        let usable = exact.is_finite() && exact <= hi && exact > lo && eval(exact).0 == a_hi;
        let level = if usable { exact } else { hi };
        return SlotState::single(profile, t, level, a_hi);
    }
    let state = SlotState::new(profile, t, hi, a_lo, a_hi, 0.0);
    let span = state.p_plus - state.p_minus;
    let mix = if span > 0.0 {
        ((power_cap - state.p_minus) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    state.with_mix(mix)
}

/// One communication interval `[start, end)` in 1-based slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub start: usize,
    pub end: usize,
    pub rb_cap: usize,
    pub rate_target: f64,
    pub power_cap: f64,
}

impl IntervalSpec {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// 0-based profile indices covered by the interval.
    pub fn slot_indices(&self) -> std::ops::Range<usize> {
        self.start - 1..self.end - 1
    }
}

/// One active RB in a binary plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub bs: usize,
    pub rb: usize,
    pub power: f64,
}

/// Binary allocation of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAllocation {
    /// 1-based slot number.
    pub slot: usize,
    pub level: f64,
    pub entries: Vec<Entry>,
}

impl SlotAllocation {
    pub fn power(&self) -> f64 {
        self.entries.iter().map(|e| e.power).sum()
    }

    pub fn max_load(&self, num_bs: usize) -> usize {
        let mut l = vec![0usize; num_bs];
        for e in &self.entries {
            l[e.bs] += 1;
        }
        l.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub spec: IntervalSpec,
    /// Optimal energy of the blended (relaxed) allocation.
    pub energy: f64,
    /// Global dual variable; slot levels are `min(global_level / ln2, cap)`.
    pub global_level: f64,
    pub slot_levels: Vec<f64>,
    pub mix: Vec<f64>,
    pub mixed_rate: f64,
    /// Deployable binary allocation.
    pub slots: Vec<SlotAllocation>,
    pub binary_energy: f64,
    pub expected_rate: f64,
    /// Set when no binary rounding reaches the target (the blend still does).
    pub binary_shortfall: bool,
}

impl InnerSolution {
    pub fn max_load(&self, num_bs: usize) -> usize {
        self.slots
            .iter()
            .map(|s| s.max_load(num_bs))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerOutcome {
    Solved(InnerSolution),
    /// Even with every slot at its cap the rate stays below target.
    Infeasible {
        phi_max: f64,
    },
}

impl InnerOutcome {
    pub fn solution(&self) -> Option<&InnerSolution> {
        match self {
            InnerOutcome::Solved(s) => Some(s),
            InnerOutcome::Infeasible { .. } => None,
        }
    }

    pub fn energy(&self) -> Option<f64> {
        self.solution().map(|s| s.energy)
    }
}

/// Solve one interval, computing slot caps on the fly.
pub fn solve_interval(spec: &IntervalSpec, profile: &ChannelProfile) -> Result<InnerOutcome> {
    let tol = Tolerances::default();
    let caps: Vec<SlotCap> = spec
        .slot_indices()
        .map(|t| solve_slot_cap(profile, t, spec.rb_cap, spec.power_cap, &tol))
        .collect();
    let refs: Vec<&SlotCap> = caps.iter().collect();
    solve_interval_with_caps(spec, profile, &refs, &tol)
}

fn slot_state_at(
    profile: &ChannelProfile,
    t: usize,
    level: f64,
    cap: &SlotCap,
    rb_cap: usize,
) -> SlotState {
    if level < cap.level {
        SlotState::single(
            profile,
            t,
            level,
            min_cost_b_matching(&slot_problem(profile, t, level, rb_cap)),
        )
    } else {
        cap.clone()
    }
}

/// Solve one interval given precomputed caps, one per slot of the interval.
pub fn solve_interval_with_caps(
    spec: &IntervalSpec,
    profile: &ChannelProfile,
    caps: &[&SlotCap],
    tol: &Tolerances,
) -> Result<InnerOutcome> {
    assert!(
        spec.start >= 1 && spec.start < spec.end && spec.end <= profile.horizon + 1,
        "interval out of range"
    );
    assert_eq!(caps.len(), spec.len());
    let slots: Vec<usize> = spec.slot_indices().collect();
    let target = spec.rate_target;

    if target <= 0.0 {
        return Ok(InnerOutcome::Solved(InnerSolution {
            spec: *spec,
            energy: 0.0,
            global_level: 0.0,
            slot_levels: vec![0.0; slots.len()],
            mix: vec![0.0; slots.len()],
            mixed_rate: 0.0,
            slots: slots
                .iter()
                .map(|&t| SlotAllocation {
                    slot: t + 1,
                    level: 0.0,
                    entries: vec![],
                })
                .collect(),
            binary_energy: 0.0,
            expected_rate: 0.0,
            binary_shortfall: false,
        }));
    }

    let states_at = |level: f64| -> Vec<SlotState> {
        slots
            .iter()
            .zip(caps)
            .map(|(&t, cap)| slot_state_at(profile, t, level, cap, spec.rb_cap))
            .collect()
    };
    let total_rate = |s: &[SlotState]| s.iter().map(SlotState::rate).sum::<f64>();

    let phi_max: f64 = caps.iter().map(|c| c.rate()).sum();
    if phi_max < target * (1.0 - 1e-12) {
        return Ok(InnerOutcome::Infeasible { phi_max });
    }

    let tol_r = tol.rate * target;
    let mut lo = slots
        .iter()
        .flat_map(|&t| profile.slot_iota(t).iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut hi = caps.iter().map(|c| c.level).fold(0.0, f64::max);
    let mut st_lo = states_at(lo);
    let mut st_hi: Vec<SlotState> = caps.iter().map(|c| (*c).clone()).collect();
    let mut r_hi = phi_max;
    let mut converged = false;
    for _ in 0..tol.max_iter {
        if r_hi - target <= tol_r || hi - lo <= 1e-14 * hi {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let st = states_at(mid);
        let r = total_rate(&st);
        if r >= target {
            (hi, st_hi, r_hi) = (mid, st, r);
        } else {
            (lo, st_lo) = (mid, st);
        }
    }
    if !converged {
        return Err(Error::Bracket(format!(
            "global level for interval [{}, {}) after {} iterations",
            spec.start, spec.end, tol.max_iter
        )));
    }

    let final_states: Vec<SlotState> = if r_hi - target <= tol_r {
        st_hi
    } else {
        blend_at_critical(
            profile,
            &slots,
            caps,
            &st_lo,
            &st_hi,
            hi,
            target,
            tol_r,
            tol.max_iter,
        )
    };

    let energy = final_states.iter().map(SlotState::power).sum();
    let mixed_rate = total_rate(&final_states);
    let (alloc, binary_energy, expected_rate, shortfall) = binary_plan(
        profile,
        &slots,
        &final_states,
        spec.power_cap,
        target,
        tol_r,
        tol.max_iter,
    );

    Ok(InnerOutcome::Solved(InnerSolution {
        spec: *spec,
        energy,
        global_level: hi * LN_2,
        slot_levels: final_states.iter().map(|s| s.level).collect(),
        mix: final_states.iter().map(|s| s.mix).collect(),
        mixed_rate,
        slots: alloc,
        binary_energy,
        expected_rate,
        binary_shortfall: shortfall,
    }))
}

/// Blend the assignments on both sides of a critical global level so the rate
/// hits the target. Uncapped slots blend with the global weight `xi`; a slot
/// that reaches its cap inside the bracket blends with `min(xi, cap mix)`;
/// slots capped on both sides keep their cap blend.
#[allow(clippy::too_many_arguments)]
fn blend_at_critical(
    profile: &ChannelProfile,
    slots: &[usize],
    caps: &[&SlotCap],
    lo: &[SlotState],
    hi: &[SlotState],
    level: f64,
    target: f64,
    tol_r: f64,
    max_iter: usize,
) -> Vec<SlotState> {
    enum Kind {
        Free,
        Capping(f64),
        Fixed,
    }
    let kinds: Vec<Kind> = lo
        .iter()
        .zip(hi)
        .zip(caps)
        .map(|((l, h), c)| {
            let lo_capped = l.level >= c.level;
            let hi_capped = h.level >= c.level;
            match (lo_capped, hi_capped) {
                (true, _) => Kind::Fixed,
                (false, true) => Kind::Capping(c.mix),
                (false, false) => Kind::Free,
            }
        })
        .collect();
    let base: Vec<SlotState> = slots
        .iter()
        .zip(lo.iter().zip(hi))
        .zip(caps.iter().zip(&kinds))
        .map(|((&t, (l, h)), (c, kind))| match kind {
            Kind::Free => SlotState::new(profile, t, level, l.minus.clone(), h.minus.clone(), 0.0),
            Kind::Capping(_) | Kind::Fixed => (*c).clone(),
        })
        .collect();
    let at = |xi: f64| -> Vec<SlotState> {
        base.iter()
            .zip(&kinds)
            .map(|(s, kind)| match kind {
                Kind::Free => s.with_mix(xi),
                Kind::Capping(m) => s.with_mix(xi.min(*m)),
                Kind::Fixed => s.clone(),
            })
            .collect()
    };
    let rate = |s: &[SlotState]| s.iter().map(SlotState::rate).sum::<f64>();
    let (mut x_lo, mut x_hi) = (0.0, 1.0);
    let mut best = at(1.0);
    let mut r_best = rate(&best);
    for _ in 0..max_iter {
        if r_best - target <= tol_r {
            break;
        }
        let mid = 0.5 * (x_lo + x_hi);
        let s = at(mid);
        let r = rate(&s);
        if r >= target {
            x_hi = mid;
            best = s;
            r_best = r;
        } else {
            x_lo = mid;
        }
    }
    best
}

/// Enumerate binary roundings of the blended slots and re-water-fill each on
/// its fixed assignment; keep the cheapest that meets the target.
fn binary_plan(
    profile: &ChannelProfile,
    slots: &[usize],
    states: &[SlotState],
    power_cap: f64,
    target: f64,
    tol_r: f64,
    max_iter: usize,
) -> (Vec<SlotAllocation>, f64, f64, bool) {
    const MAX_ENUM_SLOTS: usize = 8;
    let ambiguous: Vec<usize> = (0..states.len())
        .filter(|&i| states[i].minus != states[i].plus)
        .collect();
    let mut choices: Vec<Vec<bool>> = Vec::new();
    let n = states.len();
    if ambiguous.len() <= MAX_ENUM_SLOTS {
        for bits in 0u32..(1 << ambiguous.len()) {
            let mut c = vec![true; n];
            for (j, &i) in ambiguous.iter().enumerate() {
                c[i] = bits & (1 << j) != 0;
            }
            choices.push(c);
        }
    } else {
        choices.push(vec![false; n]);
        choices.push(vec![true; n]);
    }

    let mut best: Option<(f64, Vec<SlotAllocation>, f64)> = None;
    let mut fallback: Option<(f64, Vec<SlotAllocation>, f64)> = None;
    for choice in choices {
        let picks: Vec<&BinaryAssignment> = states
            .iter()
            .zip(&choice)
            .map(|(s, &plus)| if plus { &s.plus } else { &s.minus })
            .collect();
        let fw = fixed_waterfill(profile, slots, &picks, power_cap, target, tol_r, max_iter);
        if fw.meets_target {
            if best.as_ref().map_or(true, |b| fw.energy < b.0) {
                best = Some((fw.energy, fw.slots, fw.rate));
            }
        } else if fallback.as_ref().map_or(true, |b| fw.rate > b.2) {
            fallback = Some((fw.energy, fw.slots, fw.rate));
        }
    }
    match best {
        Some((e, s, r)) => (s, e, r, false),
        None => {
            let (e, s, r) = fallback.expect("at least one rounding");
            (s, e, r, true)
        }
    }
}

struct FixedFill {
    slots: Vec<SlotAllocation>,
    energy: f64,
    rate: f64,
    meets_target: bool,
}

/// Capped water-filling on fixed per-slot assignments.
fn fixed_waterfill(
    profile: &ChannelProfile,
    slots: &[usize],
    picks: &[&BinaryAssignment],
    power_cap: f64,
    target: f64,
    tol_r: f64,
    max_iter: usize,
) -> FixedFill {
    let floors: Vec<Vec<(usize, usize, f64)>> = slots
        .iter()
        .zip(picks)
        .map(|(&t, a)| {
            let iota = profile.slot_iota(t);
            a.pairs()
                .map(|(n, k)| (n, k, iota[n * profile.num_rb + k]))
                .collect()
        })
        .collect();
    let caps: Vec<f64> = floors
        .iter()
        .map(|f| {
            let mut v: Vec<f64> = f.iter().map(|x| x.2).collect();
            if v.is_empty() {
                0.0
            } else {
                fixed_cap_level(&mut v, power_cap)
            }
        })
        .collect();
    let rate_at = |l: f64| -> f64 {
        floors
            .iter()
            .zip(&caps)
            .map(|(f, &c)| f.iter().map(|x| water_fill(l.min(c), x.2).1).sum::<f64>())
            .sum()
    };
    let mut hi = caps.iter().copied().fold(0.0, f64::max);
    let r_max = rate_at(hi);
    let meets_target = r_max >= target * (1.0 - 1e-12);
    if meets_target {
        let mut lo = floors
            .iter()
            .flatten()
            .map(|x| x.2)
            .fold(f64::INFINITY, f64::min);
        let mut r_hi = r_max;
        for _ in 0..max_iter {
            if r_hi - target <= tol_r || hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let r = rate_at(mid);
            if r >= target {
                hi = mid;
                r_hi = r;
            } else {
                lo = mid;
            }
        }
    }
    let mut energy = 0.0;
    let mut rate = 0.0;
    let alloc = slots
        .iter()
        .zip(floors.iter().zip(&caps))
        .map(|(&t, (f, &c))| {
            let level = hi.min(c);
            let entries: Vec<Entry> = f
                .iter()
                .filter_map(|&(n, k, i)| {
                    let (p, r) = water_fill(level, i);
                    (p > 0.0).then(|| {
                        energy += p;
                        rate += r;
                        Entry {
                            bs: n,
                            rb: k,
                            power: p,
                        }
                    })
                })
                .collect();
            SlotAllocation {
                slot: t + 1,
                level,
                entries,
            }
        })
        .collect();
    FixedFill {
        slots: alloc,
        energy,
        rate,
        meets_target,
    }
}
