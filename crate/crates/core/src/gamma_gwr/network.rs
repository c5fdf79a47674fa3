use std::collections::BTreeMap;

use log::warn;

use super::hyperparams::{EdgeAging, Hyperparams};
use crate::error::{GdmError, Result};

pub type NeuronId = usize;
pub type Label = u32;

/// Frequency table of labels observed while a neuron was the BMU.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelHistogram {
    counts: BTreeMap<Label, u64>,
}

impl LabelHistogram {
    pub fn increment(&mut self, label: Label) {
        *self.counts.entry(label).or_insert(0) += 1;
    }

    pub(super) fn set(&mut self, label: Label, count: u64) {
        self.counts.insert(label, count);
    }

    pub fn count(&self, label: Label) -> u64 {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Most frequent label; ties go to the smallest label id.
    pub fn argmax(&self) -> Option<Label> {
        let mut best: Option<(Label, u64)> = None;
        for (&label, &count) in &self.counts {
            match best {
                Some((_, c)) if count <= c => {}
                _ => best = Some((label, count)),
            }
        }
        best.map(|(label, _)| label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, u64)> + '_ {
        self.counts.iter().map(|(&l, &c)| (l, c))
    }
}

/// A prototype: weight vector, `depth` context descriptors, habituation and label tables.
///
/// Weight and contexts are stored back to back as `[w, c_1, .., c_K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    dim: usize,
    state: Vec<f64>,
    habituation: f64,
    histograms: Vec<LabelHistogram>,
}

impl Neuron {
    pub(super) fn from_state(dim: usize, state: Vec<f64>, n_tables: usize) -> Self {
        debug_assert_eq!(state.len() % dim, 0);
        Self {
            dim,
            state,
            habituation: 1.0,
            histograms: vec![LabelHistogram::default(); n_tables],
        }
    }

    pub fn weight(&self) -> &[f64] {
        &self.state[..self.dim]
    }

    pub fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.state[..self.dim]
    }

    /// Context descriptor `k`, 1-based. `context(0)` is the weight.
    pub fn context(&self, k: usize) -> &[f64] {
        &self.state[k * self.dim..(k + 1) * self.dim]
    }

    pub fn context_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.state[k * self.dim..(k + 1) * self.dim]
    }

    pub fn depth(&self) -> usize {
        self.state.len() / self.dim - 1
    }

    pub fn habituation(&self) -> f64 {
        self.habituation
    }

    pub fn set_habituation(&mut self, h: f64) {
        self.habituation = h;
    }

    pub fn histogram(&self, table: usize) -> &LabelHistogram {
        &self.histograms[table]
    }

    pub(super) fn histogram_mut(&mut self, table: usize) -> &mut LabelHistogram {
        &mut self.histograms[table]
    }

    pub(super) fn state(&self) -> &[f64] {
        &self.state
    }
}

/// Global temporal context `C_1..C_K` plus the previous BMU it is derived from.
///
/// Training uses the network's own instance; read-only queries carry their own.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalContext {
    dim: usize,
    values: Vec<f64>,
    prev_bmu: Option<NeuronId>,
}

impl TemporalContext {
    pub fn new(depth: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; depth * dim],
            prev_bmu: None,
        }
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        self.prev_bmu = None;
    }

    /// Global context `C_k`, 1-based.
    pub fn get(&self, k: usize) -> &[f64] {
        &self.values[(k - 1) * self.dim..k * self.dim]
    }

    pub fn depth(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn prev_bmu(&self) -> Option<NeuronId> {
        self.prev_bmu
    }

    pub fn set_prev_bmu(&mut self, id: Option<NeuronId>) {
        self.prev_bmu = id;
    }

    pub(super) fn values(&self) -> &[f64] {
        &self.values
    }

    pub(super) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmuMatch {
    pub bmu: NeuronId,
    pub second: NeuronId,
    pub distance: f64,
    pub second_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepGates {
    pub insert: bool,
    pub update: bool,
}

impl StepGates {
    pub const OPEN: StepGates = StepGates {
        insert: true,
        update: true,
    };
}

/// What one learning iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// The neuron credited with the input: the inserted neuron on growth steps.
    pub bmu: NeuronId,
    /// The matched BMU before any insertion.
    pub matched: Option<BmuMatch>,
    pub activity: f64,
    pub inserted: Option<NeuronId>,
    /// The input seeded one of the first two neurons.
    pub seeded: bool,
    /// Weights of the matched BMU moved this step.
    pub adapted: bool,
    /// Sum and count of `eps_i * h_i` over every neuron adapted this step.
    pub update_rate_sum: f64,
    pub updates: usize,
}

/// Discrete habituation update `h + tau*kappa*(1 - h) - tau`.
pub fn habituate(h: f64, tau: f64, kappa: f64) -> f64 {
    let h = if (0.0..=1.0).contains(&h) {
        h
    } else {
        warn!("habituation {h} outside [0, 1], clamping");
        h.clamp(0.0, 1.0)
    };
    (h + tau * kappa * (1.0 - h) - tau).clamp(0.0, 1.0)
}

/// Network activity `exp(-d_b)`.
pub fn activity(distance: f64) -> Result<f64> {
    if distance < 0.0 || distance.is_nan() {
        return Err(GdmError::NegativeDistance(distance));
    }
    Ok((-distance).exp())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Recurrent Grow-When-Required network with temporal synapses.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(super) dim: usize,
    pub(super) params: Hyperparams,
    pub(super) n_tables: usize,
    pub(super) slots: Vec<Option<Neuron>>,
    pub(super) edges: Vec<BTreeMap<NeuronId, u32>>,
    pub(super) synapses: Vec<BTreeMap<NeuronId, u64>>,
    pub(super) context: TemporalContext,
    pub(super) live: usize,
}

impl Network {
    /// An empty network; the first two training inputs seed its neurons.
    pub fn new(dim: usize, n_tables: usize, params: Hyperparams) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(GdmError::InvalidHyperparams(
                "dimension must be positive".into(),
            ));
        }
        if n_tables == 0 {
            return Err(GdmError::InvalidHyperparams(
                "a network needs at least one label table".into(),
            ));
        }
        let context = TemporalContext::new(params.depth, dim);
        Ok(Self {
            dim,
            params,
            n_tables,
            slots: Vec::new(),
            edges: Vec::new(),
            synapses: Vec::new(),
            context,
            live: 0,
        })
    }

    /// A network initialized with the given weights and zero contexts.
    pub fn with_weights(
        dim: usize,
        n_tables: usize,
        params: Hyperparams,
        weights: &[Vec<f64>],
    ) -> Result<Self> {
        let mut net = Self::new(dim, n_tables, params)?;
        for w in weights {
            net.add_neuron(w)?;
        }
        Ok(net)
    }

    /// Adds an unconnected neuron at `weight` with zero contexts and full habituation.
    pub fn add_neuron(&mut self, weight: &[f64]) -> Result<NeuronId> {
        self.check_dim(weight)?;
        let mut state = vec![0.0; (self.params.depth + 1) * self.dim];
        state[..self.dim].copy_from_slice(weight);
        Ok(self.push_state(state))
    }

    pub(super) fn push_state(&mut self, state: Vec<f64>) -> NeuronId {
        let id = self.slots.len();
        self.slots
            .push(Some(Neuron::from_state(self.dim, state, self.n_tables)));
        self.edges.push(BTreeMap::new());
        self.synapses.push(BTreeMap::new());
        self.live += 1;
        id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.params.depth
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn n_tables(&self) -> usize {
        self.n_tables
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Live neuron ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.as_ref().map(|_| id))
    }

    pub fn neurons(&self) -> impl Iterator<Item = (NeuronId, &Neuron)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.as_ref().map(|n| (id, n)))
    }

    pub fn contains(&self, id: NeuronId) -> bool {
        matches!(self.slots.get(id), Some(Some(_)))
    }

    pub fn neuron(&self, id: NeuronId) -> Result<&Neuron> {
        self.slots
            .get(id)
            .and_then(Option::as_ref)
            .ok_or(GdmError::UnknownNeuron(id))
    }

    pub fn neuron_mut(&mut self, id: NeuronId) -> Result<&mut Neuron> {
        self.slots
            .get_mut(id)
            .and_then(Option::as_mut)
            .ok_or(GdmError::UnknownNeuron(id))
    }

    pub fn context(&self) -> &TemporalContext {
        &self.context
    }

    /// A zeroed context carrier for read-only sequence queries.
    pub fn fresh_context(&self) -> TemporalContext {
        TemporalContext::new(self.params.depth, self.dim)
    }

    pub fn edge_age(&self, i: NeuronId, j: NeuronId) -> Option<u32> {
        self.edges.get(i).and_then(|m| m.get(&j)).copied()
    }

    pub fn neighbors(&self, id: NeuronId) -> impl Iterator<Item = NeuronId> + '_ {
        self.edges
            .get(id)
            .into_iter()
            .flat_map(|m| m.keys().copied())
    }

    /// Undirected edges as `(i, j, age)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (NeuronId, NeuronId, u32)> + '_ {
        self.edges.iter().enumerate().flat_map(|(i, m)| {
            m.iter()
                .filter(move |(&j, _)| i < j)
                .map(move |(&j, &age)| (i, j, age))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn synapse(&self, from: NeuronId, to: NeuronId) -> u64 {
        self.synapses
            .get(from)
            .and_then(|m| m.get(&to))
            .copied()
            .unwrap_or(0)
    }

    /// Non-zero temporal synapses as `(from, to, count)`, sorted.
    pub fn synapses(&self) -> impl Iterator<Item = (NeuronId, NeuronId, u64)> + '_ {
        self.synapses
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().map(move |(&j, &c)| (i, j, c)))
    }

    fn check_dim(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.dim {
            return Err(GdmError::DimensionMismatch {
                expected: self.dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Spatiotemporal distance of neuron `id` to `input` under the network's own context.
    pub fn distance(&self, id: NeuronId, input: &[f64]) -> Result<f64> {
        self.distance_with(id, input, &self.context, self.params.depth)
    }

    /// Distance using only the first `depth` context terms of `ctx`.
    pub fn distance_with(
        &self,
        id: NeuronId,
        input: &[f64],
        ctx: &TemporalContext,
        depth: usize,
    ) -> Result<f64> {
        self.check_dim(input)?;
        let neuron = self.neuron(id)?;
        Ok(self.distance_unchecked(neuron, input, ctx, depth))
    }

    fn distance_unchecked(
        &self,
        neuron: &Neuron,
        input: &[f64],
        ctx: &TemporalContext,
        depth: usize,
    ) -> f64 {
        let alpha = &self.params.alpha;
        let mut d = alpha[0] * squared_distance(input, neuron.weight());
        for (k, &a) in alpha
            .iter()
            .enumerate()
            .take(depth.min(self.params.depth) + 1)
            .skip(1)
        {
            d += a * squared_distance(ctx.get(k), neuron.context(k));
        }
        d
    }

    /// Recomputes `ctx` from the state of its previous BMU; leaves it untouched if there is none.
    pub fn advance_context(&self, ctx: &mut TemporalContext) {
        let Some(prev) = ctx.prev_bmu else { return };
        let Some(neuron) = self.slots.get(prev).and_then(Option::as_ref) else {
            return;
        };
        let beta = self.params.beta;
        let dim = self.dim;
        let w = neuron.weight();
        for k in 1..=self.params.depth {
            let lower = neuron.context(k - 1);
            let out = &mut ctx.values[(k - 1) * dim..k * dim];
            for ((o, &wi), &ci) in out.iter_mut().zip(w).zip(lower) {
                *o = beta * wi + (1.0 - beta) * ci;
            }
        }
    }

    pub fn update_global_context(&mut self) {
        let mut ctx = std::mem::replace(&mut self.context, TemporalContext::new(0, 1));
        self.advance_context(&mut ctx);
        self.context = ctx;
    }

    pub fn reset_context(&mut self) {
        self.context.reset();
    }

    pub fn find_bmu(&self, input: &[f64]) -> Result<BmuMatch> {
        self.find_bmu_with(input, &self.context, self.params.depth)
    }

    /// Best and second-best matching units; ties go to the smallest id.
    pub fn find_bmu_with(
        &self,
        input: &[f64],
        ctx: &TemporalContext,
        depth: usize,
    ) -> Result<BmuMatch> {
        self.check_dim(input)?;
        if self.live < 2 {
            return Err(GdmError::TooFewNeurons(self.live));
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (id, neuron) in self.neurons() {
            let d = self.distance_unchecked(neuron, input, ctx, depth);
            if d < best.1 || best.0 == usize::MAX {
                second = best;
                best = (id, d);
            } else if d < second.1 || second.0 == usize::MAX {
                second = (id, d);
            }
        }
        Ok(BmuMatch {
            bmu: best.0,
            second: second.0,
            distance: best.1,
            second_distance: second.1,
        })
    }

    /// Closest neuron, for networks with at least one neuron.
    pub fn nearest_with(
        &self,
        input: &[f64],
        ctx: &TemporalContext,
        depth: usize,
    ) -> Result<Option<(NeuronId, f64)>> {
        self.check_dim(input)?;
        let mut best: Option<(NeuronId, f64)> = None;
        for (id, neuron) in self.neurons() {
            let d = self.distance_unchecked(neuron, input, ctx, depth);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
        Ok(best)
    }

    /// `[x, C_1, .., C_K]`, laid out like a neuron state.
    fn query(&self, input: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity((self.params.depth + 1) * self.dim);
        q.extend_from_slice(input);
        q.extend_from_slice(self.context.values());
        q
    }

    /// Inserts a neuron halfway between the BMU and the input when activity and
    /// habituation are both below threshold and `extra_gate` holds.
    pub fn maybe_insert(
        &mut self,
        input: &[f64],
        m: &BmuMatch,
        activity: f64,
        extra_gate: bool,
    ) -> Result<Option<NeuronId>> {
        self.check_dim(input)?;
        let q = self.query(input);
        self.insert_from_query(&q, m, activity, extra_gate)
    }

    fn insert_from_query(
        &mut self,
        q: &[f64],
        m: &BmuMatch,
        activity: f64,
        extra_gate: bool,
    ) -> Result<Option<NeuronId>> {
        let h_b = self.neuron(m.bmu)?.habituation;
        if !(activity < self.params.insertion_threshold
            && h_b < self.params.habituation_threshold
            && extra_gate)
        {
            return Ok(None);
        }
        let state: Vec<f64> = self
            .neuron(m.bmu)?
            .state()
            .iter()
            .zip(q)
            .map(|(s, x)| 0.5 * (s + x))
            .collect();
        let id = self.push_state(state);
        self.connect(id, m.bmu);
        if self.contains(m.second) {
            self.connect(id, m.second);
        }
        self.disconnect(m.bmu, m.second);
        Ok(Some(id))
    }

    fn connect(&mut self, i: NeuronId, j: NeuronId) {
        self.edges[i].insert(j, 0);
        self.edges[j].insert(i, 0);
    }

    fn disconnect(&mut self, i: NeuronId, j: NeuronId) {
        if let Some(m) = self.edges.get_mut(i) {
            m.remove(&j);
        }
        if let Some(m) = self.edges.get_mut(j) {
            m.remove(&i);
        }
    }

    /// Moves the BMU and its topological neighbours toward the input and current
    /// context, then habituates them. Returns the sum and count of applied rates.
    pub fn adapt(&mut self, bmu: NeuronId, input: &[f64]) -> Result<(f64, usize)> {
        self.check_dim(input)?;
        self.neuron(bmu)?;
        let q = self.query(input);
        Ok(self.adapt_to_query(bmu, &q))
    }

    fn adapt_to_query(&mut self, bmu: NeuronId, q: &[f64]) -> (f64, usize) {
        let p = &self.params;
        let (eps_b, eps_n, tau_b, tau_n, kappa) = (p.eps_b, p.eps_n, p.tau_b, p.tau_n, p.kappa);
        let neighbors: Vec<NeuronId> = self.edges[bmu].keys().copied().collect();
        let mut rate_sum = 0.0;
        let mut updates = 0;

        let mut step = |neuron: &mut Neuron, eps: f64, tau: f64| {
            let rate = eps * neuron.habituation;
            if rate != 0.0 {
                for (s, x) in neuron.state.iter_mut().zip(q) {
                    *s += rate * (x - *s);
                }
            }
            neuron.habituation = habituate(neuron.habituation, tau, kappa);
            rate_sum += rate;
            updates += 1;
        };

        if let Some(n) = self.slots[bmu].as_mut() {
            step(n, eps_b, tau_b);
        }
        for id in neighbors {
            if let Some(n) = self.slots[id].as_mut() {
                step(n, eps_n, tau_n);
            }
        }
        (rate_sum, updates)
    }

    /// Competitive Hebbian update: the BMU/second-BMU edge is created or refreshed
    /// to age 0 and the other edges age by one. Old edges are pruned when
    /// `max_edge_age` is set.
    pub fn update_edges(&mut self, bmu: NeuronId, second: NeuronId) -> Result<()> {
        self.neuron(bmu)?;
        self.neuron(second)?;
        if bmu == second {
            return Err(GdmError::Invariant(format!(
                "edge update needs distinct neurons, got {bmu} twice"
            )));
        }
        match self.params.edge_aging {
            EdgeAging::BmuIncident => {
                let incident: Vec<NeuronId> = self.edges[bmu].keys().copied().collect();
                for j in incident {
                    if j != second {
                        let age = self.edges[bmu][&j] + 1;
                        self.edges[bmu].insert(j, age);
                        self.edges[j].insert(bmu, age);
                    }
                }
            }
            EdgeAging::Global => {
                for m in &mut self.edges {
                    m.values_mut().for_each(|age| *age += 1);
                }
            }
        }
        self.connect(bmu, second);
        if let Some(max_age) = self.params.max_edge_age {
            self.prune(max_age);
        }
        Ok(())
    }

    fn prune(&mut self, max_age: u32) {
        let stale: Vec<(NeuronId, NeuronId)> = self
            .edges()
            .filter(|&(_, _, age)| age > max_age)
            .map(|(i, j, _)| (i, j))
            .collect();
        let mut orphans = Vec::new();
        for (i, j) in stale {
            self.disconnect(i, j);
            orphans.extend([i, j].into_iter().filter(|&n| self.edges[n].is_empty()));
        }
        orphans.sort_unstable();
        orphans.dedup();
        for id in orphans {
            if self.live <= 2 {
                break;
            }
            self.remove_neuron(id);
        }
    }

    fn remove_neuron(&mut self, id: NeuronId) {
        self.slots[id] = None;
        self.live -= 1;
        let adjacent: Vec<NeuronId> = self.edges[id].keys().copied().collect();
        for j in adjacent {
            self.edges[j].remove(&id);
        }
        self.edges[id].clear();
        self.synapses[id].clear();
        for m in &mut self.synapses {
            m.remove(&id);
        }
        if self.context.prev_bmu == Some(id) {
            self.context.prev_bmu = None;
        }
    }

    /// Adds one observation per label table to neuron `id`.
    pub fn update_labels(&mut self, id: NeuronId, labels: &[Label]) -> Result<()> {
        if labels.len() != self.n_tables {
            return Err(GdmError::LabelArity {
                expected: self.n_tables,
                got: labels.len(),
            });
        }
        let neuron = self.neuron_mut(id)?;
        for (table, &label) in labels.iter().enumerate() {
            neuron.histogram_mut(table).increment(label);
        }
        Ok(())
    }

    pub fn predict_label(&self, id: NeuronId, table: usize) -> Result<Option<Label>> {
        let neuron = self.neuron(id)?;
        Ok(neuron
            .histograms
            .get(table)
            .and_then(LabelHistogram::argmax))
    }

    pub fn strengthen_temporal(&mut self, prev: NeuronId, current: NeuronId) -> Result<()> {
        self.neuron(prev)?;
        self.neuron(current)?;
        *self.synapses[prev].entry(current).or_insert(0) += 1;
        Ok(())
    }

    /// Strongest temporal successor of `id`, excluding itself.
    pub fn next_neuron(&self, id: NeuronId) -> Result<Option<NeuronId>> {
        self.neuron(id)?;
        let mut best: Option<(NeuronId, u64)> = None;
        for (&j, &count) in &self.synapses[id] {
            if j == id || count == 0 {
                continue;
            }
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((j, count));
            }
        }
        Ok(best.map(|(j, _)| j))
    }

    /// Strongest temporal predecessor of `id`, excluding itself.
    pub fn previous_neuron(&self, id: NeuronId) -> Result<Option<NeuronId>> {
        self.neuron(id)?;
        let mut best: Option<(NeuronId, u64)> = None;
        for (from, m) in self.synapses.iter().enumerate() {
            if from == id {
                continue;
            }
            if let Some(&count) = m.get(&id) {
                if count > 0 && best.is_none_or(|(_, c)| count > c) {
                    best = Some((from, count));
                }
            }
        }
        Ok(best.map(|(j, _)| j))
    }

    /// One learning iteration with fixed gates.
    pub fn train_step(
        &mut self,
        input: &[f64],
        labels: &[Label],
        insert_gate: bool,
        update_gate: bool,
    ) -> Result<StepReport> {
        self.train_step_gated(input, labels, |_, _| StepGates {
            insert: insert_gate,
            update: update_gate,
        })
    }

    /// One learning iteration whose gates are decided from the matched BMU.
    ///
    /// Order: context update, BMU search, activity, insertion, then (when nothing
    /// was inserted) adaptation and edge update, label association on the
    /// credited neuron, temporal synapse from the previous BMU.
    pub fn train_step_gated<G>(
        &mut self,
        input: &[f64],
        labels: &[Label],
        gates: G,
    ) -> Result<StepReport>
    where
        G: FnOnce(&Network, &BmuMatch) -> StepGates,
    {
        self.check_dim(input)?;
        if labels.len() != self.n_tables {
            return Err(GdmError::LabelArity {
                expected: self.n_tables,
                got: labels.len(),
            });
        }
        self.update_global_context();
        let q = self.query(input);

        if self.live < 2 {
            let id = self.push_state(q);
            self.finish_step(id, labels)?;
            return Ok(StepReport {
                bmu: id,
                matched: None,
                activity: 1.0,
                inserted: Some(id),
                seeded: true,
                adapted: false,
                update_rate_sum: 0.0,
                updates: 0,
            });
        }

        let m = self.find_bmu(input)?;
        let a = activity(m.distance)?;
        let gates = gates(self, &m);
        let inserted = self.insert_from_query(&q, &m, a, gates.insert)?;

        let mut adapted = false;
        let (mut rate_sum, mut updates) = (0.0, 0);
        let credited = match inserted {
            Some(new) => {
                if self.params.adapt_on_insert && gates.update {
                    (rate_sum, updates) = self.adapt_to_query(m.bmu, &q);
                    adapted = true;
                }
                new
            }
            None => {
                if gates.update {
                    (rate_sum, updates) = self.adapt_to_query(m.bmu, &q);
                    adapted = true;
                }
                self.update_edges(m.bmu, m.second)?;
                m.bmu
            }
        };
        self.finish_step(credited, labels)?;
        Ok(StepReport {
            bmu: credited,
            matched: Some(m),
            activity: a,
            inserted,
            seeded: false,
            adapted,
            update_rate_sum: rate_sum,
            updates,
        })
    }

    fn finish_step(&mut self, credited: NeuronId, labels: &[Label]) -> Result<()> {
        self.update_labels(credited, labels)?;
        if let Some(prev) = self.context.prev_bmu {
            if self.contains(prev) {
                self.strengthen_temporal(prev, credited)?;
            }
        }
        self.context.prev_bmu = Some(credited);
        Ok(())
    }
}
