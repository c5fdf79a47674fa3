//! `GWRN` network snapshots. Layout is documented in `docs/formats.md`.

use std::collections::BTreeMap;

use super::hyperparams::{EdgeAging, Hyperparams};
use super::network::{Network, Neuron, TemporalContext};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::Result;

pub const NETWORK_MAGIC: &[u8; 4] = b"GWRN";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write_to(&mut w);
        w.into_inner()
    }

    pub(crate) fn write_to(&self, w: &mut ByteWriter) {
        let depth = self.params.depth;
        w.bytes(NETWORK_MAGIC);
        w.u32(NETWORK_FORMAT_VERSION);
        w.u32(self.dim as u32);
        w.u32(depth as u32);
        w.u32(self.n_tables as u32);
        w.u64(self.slots.len() as u64);
        w.u64(self.live as u64);
        for (id, n) in self.neurons() {
            w.u64(id as u64);
            w.f64s(n.state());
            w.f64(n.habituation());
            for table in 0..self.n_tables {
                let h = n.histogram(table);
                let entries: Vec<_> = h.iter().collect();
                w.u32(entries.len() as u32);
                for (label, count) in entries {
                    w.u32(label);
                    w.u64(count);
                }
            }
        }
        let edges: Vec<_> = self.edges().collect();
        w.u64(edges.len() as u64);
        for (i, j, age) in edges {
            w.u64(i as u64);
            w.u64(j as u64);
            w.u32(age);
        }
        let synapses: Vec<_> = self.synapses().collect();
        w.u64(synapses.len() as u64);
        for (i, j, count) in synapses {
            w.u64(i as u64);
            w.u64(j as u64);
            w.u64(count);
        }
        w.f64s(self.context.values());
        match self.context.prev_bmu() {
            Some(id) => {
                w.u8(1);
                w.u64(id as u64);
            }
            None => {
                w.u8(0);
                w.u64(0);
            }
        }
        let p = &self.params;
        for v in [
            p.insertion_threshold,
            p.habituation_threshold,
            p.tau_b,
            p.tau_n,
            p.kappa,
            p.beta,
            p.eps_b,
            p.eps_n,
        ] {
            w.f64(v);
        }
        w.f64s(&p.alpha);
        match p.max_edge_age {
            Some(age) => {
                w.u8(1);
                w.u32(age);
            }
            None => {
                w.u8(0);
                w.u32(0);
            }
        }
        w.u8(match p.edge_aging {
            EdgeAging::BmuIncident => 0,
            EdgeAging::Global => 1,
        });
        w.u8(p.adapt_on_insert as u8);
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new("network snapshot", bytes);
        let net = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(net)
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>) -> Result<Self> {
        r.magic(NETWORK_MAGIC)?;
        let at = r.offset();
        let version = r.u32("format version")?;
        if version != NETWORK_FORMAT_VERSION {
            return Err(r.error_at(at, format!("unsupported network format version {version}")));
        }
        let at = r.offset();
        let dim = r.u32("dimension")? as usize;
        let depth = r.u32("depth")? as usize;
        let n_tables = r.u32("label table count")? as usize;
        if dim == 0 || n_tables == 0 {
            return Err(r.error_at(at, "dimension and label table count must be positive"));
        }
        let slot_count = r.len("slot count", 0)?;
        let state_len = (depth + 1) * dim;
        let live = r.len("neuron count", 8 * (state_len + 2))?;
        if live > slot_count {
            return Err(r.error(format!("{live} neurons exceed {slot_count} slots")));
        }

        let mut slots: Vec<Option<Neuron>> = vec![None; slot_count];
        let mut last_id: Option<usize> = None;
        for _ in 0..live {
            let at = r.offset();
            let id = r.u64("neuron id")? as usize;
            if id >= slot_count || last_id.is_some_and(|l| id <= l) {
                return Err(r.error_at(at, format!("neuron id {id} out of order or range")));
            }
            last_id = Some(id);
            let state = r.f64s(state_len, "neuron state")?;
            let mut neuron = Neuron::from_state(dim, state, n_tables);
            neuron.set_habituation(r.f64("habituation")?);
            for table in 0..n_tables {
                let entries = r.u32("histogram size")?;
                for _ in 0..entries {
                    let label = r.u32("label")?;
                    let count = r.u64("label count")?;
                    neuron.histogram_mut(table).set(label, count);
                }
            }
            slots[id] = Some(neuron);
        }

        let mut edges = vec![BTreeMap::new(); slot_count];
        let n_edges = r.len("edge count", 20)?;
        for _ in 0..n_edges {
            let at = r.offset();
            let i = r.u64("edge endpoint")? as usize;
            let j = r.u64("edge endpoint")? as usize;
            let age = r.u32("edge age")?;
            let live_pair = i != j
                && slots.get(i).is_some_and(Option::is_some)
                && slots.get(j).is_some_and(Option::is_some);
            if !live_pair {
                return Err(r.error_at(at, format!("edge ({i}, {j}) references a dead neuron")));
            }
            edges[i].insert(j, age);
            edges[j].insert(i, age);
        }

        let mut synapses = vec![BTreeMap::new(); slot_count];
        let n_syn = r.len("synapse count", 24)?;
        for _ in 0..n_syn {
            let at = r.offset();
            let i = r.u64("synapse source")? as usize;
            let j = r.u64("synapse target")? as usize;
            let count = r.u64("synapse count")?;
            let live_pair = slots.get(i).is_some_and(Option::is_some)
                && slots.get(j).is_some_and(Option::is_some);
            if !live_pair {
                return Err(r.error_at(at, format!("synapse ({i}, {j}) references a dead neuron")));
            }
            synapses[i].insert(j, count);
        }

        let mut context = TemporalContext::new(depth, dim);
        let values = r.f64s(depth * dim, "global context")?;
        context.values_mut().copy_from_slice(&values);
        let has_prev = r.u8("previous BMU flag")?;
        let prev = r.u64("previous BMU")? as usize;
        if has_prev == 1 {
            context.set_prev_bmu(Some(prev));
        }

        let mut scalars = [0.0; 8];
        for s in &mut scalars {
            *s = r.f64("hyperparameter")?;
        }
        let alpha = r.f64s(depth + 1, "alpha")?;
        let has_max_age = r.u8("max edge age flag")?;
        let max_age = r.u32("max edge age")?;
        let at = r.offset();
        let edge_aging = match r.u8("edge aging")? {
            0 => EdgeAging::BmuIncident,
            1 => EdgeAging::Global,
            other => return Err(r.error_at(at, format!("unknown edge aging mode {other}"))),
        };
        let adapt_on_insert = r.u8("adapt on insert")? != 0;
        let [insertion_threshold, habituation_threshold, tau_b, tau_n, kappa, beta, eps_b, eps_n] =
            scalars;
        let params = Hyperparams {
            insertion_threshold,
            habituation_threshold,
            tau_b,
            tau_n,
            kappa,
            depth,
            alpha,
            beta,
            eps_b,
            eps_n,
            max_edge_age: (has_max_age == 1).then_some(max_age),
            edge_aging,
            adapt_on_insert,
        };
        params.validate()?;

        Ok(Network {
            dim,
            params,
            n_tables,
            slots,
            edges,
            synapses,
            context,
            live,
        })
    }
}
