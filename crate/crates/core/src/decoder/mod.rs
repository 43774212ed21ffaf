//! Unicolor and Multicolor merge-and-color decoders.

mod forest;
pub mod processors;

pub use forest::{ColorForest, NodeId};
pub use processors::{process_mergeable, process_resolvable, process_singleton, TAU};

use num_complex::Complex64;

use crate::ensemble::CodeEnsemble;
use crate::error::{Error, Result};
use crate::measurement::{MeasurementSet, ModulationParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Unicolor,
    Multicolor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    FullRecovery,
    PartialRecovery,
    Failure,
}

impl DecodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeStatus::FullRecovery => "full",
            DecodeStatus::PartialRecovery => "partial",
            DecodeStatus::Failure => "failure",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderOptions {
    pub tolerance: f64,
    /// Sweep budget; defaults to K + 2 when K is known.
    pub max_sweeps: Option<usize>,
    /// Keep sweeping past convergence so trajectories have a fixed length.
    pub min_sweeps: usize,
    /// Bins whose largest magnitude is below this fraction of the global
    /// maximum are treated as empty.
    pub zero_floor: f64,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self { tolerance: TAU, max_sweeps: None, min_sweeps: 0, zero_floor: 1e-12 }
    }
}

/// Peak counts of resident decoder state, for memory audits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResourceCounters {
    pub bins: usize,
    pub discovered_entries: usize,
    pub forest_nodes: usize,
}

impl ResourceCounters {
    pub fn resident(&self) -> usize {
        self.bins + self.discovered_entries + 2 * self.forest_nodes
    }
}

#[derive(Clone, Debug)]
pub struct DecodeResult {
    /// Recovered support, sorted by index, in the surviving color's frame.
    pub recovered: Vec<(u64, Complex64)>,
    pub status: DecodeStatus,
    /// Sweeps performed, the singleton pass included.
    pub iterations: usize,
    pub fraction_recovered: f64,
    /// Balls of the surviving color in the order they were colored.
    pub order: Vec<u64>,
    /// Size of the largest color after each sweep.
    pub trajectory: Vec<usize>,
    pub resources: ResourceCounters,
}

struct State<'a> {
    ens: &'a CodeEnsemble,
    params: ModulationParams,
    y: &'a [[f64; 4]],
    tol: f64,
    active: Vec<bool>,
    forest: ColorForest,
    discovered: Vec<Vec<NodeId>>,
    exhausted: Vec<bool>,
    order: Vec<u64>,
    slots: Vec<usize>,
    scratch: Vec<usize>,
    peak: ResourceCounters,
    discovered_total: usize,
}

enum BinView {
    Empty,
    One(NodeId, Vec<(u64, Complex64)>),
    Two([(NodeId, Vec<(u64, Complex64)>); 2]),
    Many,
}

impl<'a> State<'a> {
    fn new(meas: &'a MeasurementSet, ens: &'a CodeEnsemble, opts: &DecoderOptions) -> Result<Self> {
        if meas.bins.len() != ens.m() {
            return Err(Error::Dimension(format!(
                "{} measured bins for an ensemble with M = {}",
                meas.bins.len(),
                ens.m()
            )));
        }
        if meas.params.n() != ens.n() {
            return Err(Error::Dimension(format!(
                "modulation n = {} but ensemble n = {}",
                meas.params.n(),
                ens.n()
            )));
        }
        let gmax = meas.bins.iter().flatten().copied().fold(0.0, f64::max);
        let floor = opts.zero_floor * gmax;
        let active: Vec<bool> = meas
            .bins
            .iter()
            .map(|b| gmax > 0.0 && b.iter().copied().fold(0.0, f64::max) > floor)
            .collect();
        let m = ens.m();
        Ok(Self {
            ens,
            params: meas.params,
            y: &meas.bins,
            tol: opts.tolerance,
            active,
            forest: ColorForest::new(),
            discovered: vec![Vec::new(); m],
            exhausted: vec![false; m],
            order: Vec::new(),
            slots: Vec::with_capacity(ens.d()),
            scratch: Vec::with_capacity(ens.d()),
            peak: ResourceCounters { bins: m, ..Default::default() },
            discovered_total: 0,
        })
    }

    fn admissible(&mut self, slot: usize) -> impl FnMut(u64) -> bool + '_ {
        let (ens, forest, scratch) = (self.ens, &self.forest, &mut self.scratch);
        move |l| !forest.contains(l) && ens.contains(l, slot, scratch)
    }

    fn register(&mut self, l: u64, node: NodeId) {
        self.ens.slots_into(l, &mut self.slots);
        for &s in &self.slots {
            self.discovered[s].push(node);
        }
        self.discovered_total += self.slots.len();
        self.order.push(l);
        self.peak.discovered_entries = self.peak.discovered_entries.max(self.discovered_total);
        self.peak.forest_nodes = self.peak.forest_nodes.max(self.forest.len());
    }

    fn color_new(&mut self, l: u64, value: Complex64) {
        let node = self.forest.add_root(l, value);
        self.register(l, node);
    }

    fn color_into(&mut self, root: NodeId, l: u64, value: Complex64) {
        let node = self.forest.add_to(root, l, value);
        self.register(l, node);
    }

    /// Discovered balls of a bin grouped by color, values in root frames.
    fn view(&mut self, slot: usize) -> BinView {
        let mut groups: Vec<(NodeId, Vec<(u64, Complex64)>)> = Vec::new();
        for i in 0..self.discovered[slot].len() {
            let v = self.discovered[slot][i];
            let (root, val) = self.forest.resolve(v);
            let ball = self.forest.ball(v);
            match groups.iter_mut().find(|g| g.0 == root) {
                Some(g) => g.1.push((ball, val)),
                None => {
                    if groups.len() == 2 {
                        return BinView::Many;
                    }
                    groups.push((root, vec![(ball, val)]));
                }
            }
        }
        match groups.len() {
            0 => BinView::Empty,
            1 => {
                let (r, b) = groups.pop().unwrap();
                BinView::One(r, b)
            }
            _ => {
                let second = groups.pop().unwrap();
                let first = groups.pop().unwrap();
                BinView::Two([first, second])
            }
        }
    }

    fn singleton_pass(&mut self) {
        for slot in 0..self.y.len() {
            if !self.active[slot] || !self.discovered[slot].is_empty() {
                continue;
            }
            let (y, params, tol) = (self.y[slot], self.params, self.tol);
            let hit = process_singleton(&y, &params, tol, &mut self.admissible(slot));
            if let Some((l, mag)) = hit {
                self.color_new(l, Complex64::new(mag, 0.0));
                self.exhausted[slot] = true;
            }
        }
    }

    /// Marks the bin exhausted if its discovered balls explain it; returns
    /// whether it was.
    fn check_exhausted(&mut self, slot: usize, balls: &[(u64, Complex64)]) -> bool {
        let y = &self.y[slot];
        let sums = processors::modulated_sums(&self.params, balls);
        let scale = processors::bin_scale(y, balls);
        if processors::reproduces(y, &sums, self.tol, scale) {
            self.exhausted[slot] = true;
        }
        self.exhausted[slot]
    }

    fn try_resolve(&mut self, slot: usize, root: NodeId, balls: &[(u64, Complex64)]) -> bool {
        if self.check_exhausted(slot, balls) {
            return false;
        }
        let (y, params, tol) = (self.y[slot], self.params, self.tol);
        let hit = process_resolvable(&y, balls, &params, tol, &mut self.admissible(slot));
        match hit {
            Some((l, x)) => {
                self.color_into(root, l, x);
                self.exhausted[slot] = true;
                true
            }
            None => false,
        }
    }

    fn try_merge(&mut self, slot: usize, groups: &[(NodeId, Vec<(u64, Complex64)>); 2]) -> bool {
        let (y, params, tol) = (self.y[slot], self.params, self.tol);
        match process_mergeable(&y, &groups[0].1, &groups[1].1, &params, tol) {
            Some(rot) => {
                self.forest.merge(groups[0].0, groups[1].0, rot);
                self.exhausted[slot] = true;
                true
            }
            None => false,
        }
    }

    fn largest(&mut self) -> usize {
        self.forest.largest_root().map(|r| self.forest.size(r)).unwrap_or(0)
    }

    /// Drops every color except the largest.
    fn keep_largest(&mut self) {
        let Some(root) = self.forest.largest_root() else { return };
        let (fresh, map) = self.forest.restrict_to(root);
        for list in &mut self.discovered {
            list.retain_mut(|v| match map[v.0 as usize] {
                Some(nv) => {
                    *v = nv;
                    true
                }
                None => false,
            });
        }
        self.discovered_total = self.discovered.iter().map(Vec::len).sum();
        self.forest = fresh;
        let forest = &self.forest;
        self.order.retain(|l| forest.contains(*l));
        for (slot, ex) in self.exhausted.iter_mut().enumerate() {
            if *ex && self.discovered[slot].is_empty() {
                *ex = false;
            }
        }
    }

    fn finish(mut self, k_hint: Option<usize>, sweeps: usize, trajectory: Vec<usize>) -> DecodeResult {
        let recovered = match self.forest.largest_root() {
            Some(r) => self.forest.component(r),
            None => Vec::new(),
        };
        let forest = &self.forest;
        let keep: std::collections::HashSet<u64> = recovered.iter().map(|e| e.0).collect();
        let order: Vec<u64> = self.order.iter().copied().filter(|l| keep.contains(l) && forest.contains(*l)).collect();
        let (fraction, status) = match k_hint {
            Some(0) => (1.0, DecodeStatus::FullRecovery),
            Some(k) => {
                let f = (recovered.len() as f64 / k as f64).min(1.0);
                let s = if recovered.len() >= k {
                    DecodeStatus::FullRecovery
                } else if recovered.is_empty() {
                    DecodeStatus::Failure
                } else {
                    DecodeStatus::PartialRecovery
                };
                (f, s)
            }
            None => {
                let total = self.active.iter().filter(|a| **a).count();
                if total == 0 {
                    (1.0, DecodeStatus::FullRecovery)
                } else {
                    let balls = recovered.clone();
                    let explained = (0..self.y.len())
                        .filter(|&s| self.active[s])
                        .filter(|&s| {
                            let members: Vec<(u64, Complex64)> = self.discovered[s]
                                .iter()
                                .map(|v| self.forest.ball(*v))
                                .filter_map(|l| balls.binary_search_by_key(&l, |e| e.0).ok().map(|p| balls[p]))
                                .collect();
                            let sums = processors::modulated_sums(&self.params, &members);
                            processors::reproduces(
                                &self.y[s],
                                &sums,
                                self.tol,
                                processors::bin_scale(&self.y[s], &members),
                            )
                        })
                        .count();
                    let f = explained as f64 / total as f64;
                    let s = if explained == total {
                        DecodeStatus::FullRecovery
                    } else if recovered.is_empty() {
                        DecodeStatus::Failure
                    } else {
                        DecodeStatus::PartialRecovery
                    };
                    (f, s)
                }
            }
        };
        DecodeResult {
            recovered,
            status,
            iterations: sweeps,
            fraction_recovered: fraction,
            order,
            trajectory,
            resources: self.peak,
        }
    }
}

fn sweep_budget(opts: &DecoderOptions, k_hint: Option<usize>, m: usize) -> usize {
    opts.max_sweeps.unwrap_or_else(|| k_hint.unwrap_or(m) + 2).max(opts.min_sweeps)
}

/// Unicolor decoding: singletons, one round of two-color merges, keep the
/// largest color, then grow it with resolvable bins only.
pub fn decode_unicolor(
    meas: &MeasurementSet,
    ens: &CodeEnsemble,
    k_hint: Option<usize>,
) -> Result<DecodeResult> {
    decode(meas, ens, Algorithm::Unicolor, k_hint, &DecoderOptions::default())
}

/// Multicolor decoding: singletons, then sweeps of resolvable and
/// mergeable processing until nothing changes.
pub fn decode_multicolor(
    meas: &MeasurementSet,
    ens: &CodeEnsemble,
    k_hint: Option<usize>,
) -> Result<DecodeResult> {
    decode(meas, ens, Algorithm::Multicolor, k_hint, &DecoderOptions::default())
}

pub fn decode(
    meas: &MeasurementSet,
    ens: &CodeEnsemble,
    algorithm: Algorithm,
    k_hint: Option<usize>,
    opts: &DecoderOptions,
) -> Result<DecodeResult> {
    let mut st = State::new(meas, ens, opts)?;
    let budget = sweep_budget(opts, k_hint, ens.m());
    let done = |st: &mut State, sweeps: usize| {
        sweeps >= opts.min_sweeps && k_hint.is_some_and(|k| st.largest() >= k)
    };
    let mut trajectory = Vec::new();
    let mut sweeps = 0;
    if budget == 0 {
        return Ok(st.finish(k_hint, 0, trajectory));
    }

    st.singleton_pass();
    sweeps += 1;
    trajectory.push(st.largest());

    match algorithm {
        Algorithm::Unicolor => {
            if sweeps < budget && !done(&mut st, sweeps) {
                for slot in 0..st.y.len() {
                    if !st.active[slot] || st.exhausted[slot] || st.discovered[slot].len() != 2 {
                        continue;
                    }
                    if let BinView::Two(groups) = st.view(slot) {
                        st.try_merge(slot, &groups);
                    }
                }
                st.keep_largest();
                sweeps += 1;
                trajectory.push(st.largest());
            }
            while sweeps < budget && !done(&mut st, sweeps) {
                let mut changed = false;
                for slot in 0..st.y.len() {
                    if !st.active[slot] || st.exhausted[slot] {
                        continue;
                    }
                    if let BinView::One(root, balls) = st.view(slot) {
                        changed |= st.try_resolve(slot, root, &balls);
                    }
                }
                sweeps += 1;
                trajectory.push(st.largest());
                if !changed && sweeps >= opts.min_sweeps {
                    break;
                }
            }
        }
        Algorithm::Multicolor => {
            while sweeps < budget && !done(&mut st, sweeps) {
                let mut changed = false;
                for slot in 0..st.y.len() {
                    if !st.active[slot] || st.exhausted[slot] {
                        continue;
                    }
                    if let BinView::One(root, balls) = st.view(slot) {
                        changed |= st.try_resolve(slot, root, &balls);
                    }
                }
                for slot in 0..st.y.len() {
                    if !st.active[slot] || st.exhausted[slot] {
                        continue;
                    }
                    if let BinView::Two(groups) = st.view(slot) {
                        changed |= st.try_merge(slot, &groups);
                    }
                }
                sweeps += 1;
                trajectory.push(st.largest());
                if !changed && sweeps >= opts.min_sweeps {
                    break;
                }
            }
        }
    }
    Ok(st.finish(k_hint, sweeps, trajectory))
}
