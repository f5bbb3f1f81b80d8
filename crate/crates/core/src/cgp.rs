//! Cartesian genetic programming encoding of feed-forward neural networks.
//!
//! A [`Genotype`] is a fixed-length chromosome of nodes. Each node carries a
//! transfer function plus `arity` (connection, weight) pairs; connections
//! point at a network input or at a node with a smaller index. Only the
//! nodes reachable backwards from an output binding take part in the
//! network, see [`Genotype::decode_active`].
//!
//! Addresses are shared between inputs and nodes: address `a < num_inputs`
//! is input `a`, anything above is node `a - num_inputs`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferFn {
    Tanh,
    Softsign,
    Step,
    Sigmoid,
    Gauss,
}

impl TransferFn {
    pub const ALL: [TransferFn; 5] = [
        TransferFn::Tanh,
        TransferFn::Softsign,
        TransferFn::Step,
        TransferFn::Sigmoid,
        TransferFn::Gauss,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            TransferFn::Tanh => x.tanh(),
            TransferFn::Softsign => x / (1.0 + x.abs()),
            TransferFn::Step => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TransferFn::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            TransferFn::Gauss => (-x * x).exp(),
        }
    }
}

impl fmt::Display for TransferFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TransferFn::Tanh => "tanh",
            TransferFn::Softsign => "softsign",
            TransferFn::Step => "step",
            TransferFn::Sigmoid => "sigmoid",
            TransferFn::Gauss => "gauss",
        };
        f.write_str(name)
    }
}

/// Closed interval connection weights are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub lower: f64,
    pub upper: f64,
}

impl WeightRange {
    pub fn contains(&self, w: f64) -> bool {
        w >= self.lower && w <= self.upper
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lower + (self.upper - self.lower) * rng.random::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgpConfig {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub num_nodes: usize,
    pub arity: usize,
    pub weight_range: WeightRange,
    pub function_set: Vec<TransferFn>,
}

impl CgpConfig {
    pub fn new(
        num_inputs: usize,
        num_outputs: usize,
        num_nodes: usize,
        arity: usize,
        weight_range: WeightRange,
        function_set: Vec<TransferFn>,
    ) -> Result<Self> {
        let config = CgpConfig {
            num_inputs,
            num_outputs,
            num_nodes,
            arity,
            weight_range,
            function_set,
        };
        config.validate()?;
        Ok(config)
    }

    /// Network shape used for a control task: 200 nodes of arity 20 for
    /// CartPole, 100 nodes of arity 10 for MountainCar, weights in [-1, 1]
    /// and all five transfer functions.
    pub fn for_env(env: EnvKind) -> Self {
        let spec = env.spec();
        let (num_nodes, arity) = match env {
            EnvKind::CartPole => (200, 20),
            EnvKind::MountainCar => (100, 10),
        };
        CgpConfig {
            num_inputs: spec.obs_dim,
            num_outputs: spec.action_count,
            num_nodes,
            arity,
            weight_range: WeightRange {
                lower: -1.0,
                upper: 1.0,
            },
            function_set: TransferFn::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.num_inputs == 0 {
            return fail("num_inputs must be at least 1");
        }
        if self.num_outputs == 0 {
            return fail("num_outputs must be at least 1");
        }
        if self.num_nodes == 0 {
            return fail("num_nodes must be at least 1");
        }
        if self.arity == 0 {
            return fail("arity must be at least 1");
        }
        let WeightRange { lower, upper } = self.weight_range;
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return fail("weight range must be a finite interval with lower < upper");
        }
        if self.function_set.is_empty() {
            return fail("function set must not be empty");
        }
        Ok(())
    }

    /// Genes per node: one function gene, then `arity` connections and
    /// `arity` weights.
    pub fn genes_per_node(&self) -> usize {
        1 + 2 * self.arity
    }

    pub fn gene_count(&self) -> usize {
        self.num_nodes * self.genes_per_node() + self.num_outputs
    }

    /// Number of addressable sources (inputs plus nodes).
    pub fn address_count(&self) -> usize {
        self.num_inputs + self.num_nodes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub function: usize,
    pub connections: Vec<usize>,
    pub weights: Vec<f64>,
}

/// A CGP chromosome. The configuration is shared between all genotypes of
/// a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    config: Arc<CgpConfig>,
    nodes: Vec<NodeGene>,
    outputs: Vec<usize>,
}

impl Genotype {
    /// Builds a genotype from parts, checking every structural invariant.
    pub fn from_parts(
        config: Arc<CgpConfig>,
        nodes: Vec<NodeGene>,
        outputs: Vec<usize>,
    ) -> Result<Self> {
        let g = Genotype {
            config,
            nodes,
            outputs,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn random<R: Rng + ?Sized>(config: Arc<CgpConfig>, rng: &mut R) -> Self {
        let c = &*config;
        let nodes = (0..c.num_nodes)
            .map(|i| {
                let function = rng.random_range(0..c.function_set.len());
                let connections = (0..c.arity)
                    .map(|_| rng.random_range(0..c.num_inputs + i))
                    .collect();
                let weights = (0..c.arity).map(|_| c.weight_range.sample(rng)).collect();
                NodeGene {
                    function,
                    connections,
                    weights,
                }
            })
            .collect();
        let outputs = (0..c.num_outputs)
            .map(|_| rng.random_range(0..c.address_count()))
            .collect();
        Genotype {
            config,
            nodes,
            outputs,
        }
    }

    pub fn config(&self) -> &Arc<CgpConfig> {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn validate(&self) -> Result<()> {
        let c = &*self.config;
        c.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.nodes.len() != c.num_nodes {
            return bad(format!(
                "expected {} nodes, found {}",
                c.num_nodes,
                self.nodes.len()
            ));
        }
        if self.outputs.len() != c.num_outputs {
            return bad(format!(
                "expected {} outputs, found {}",
                c.num_outputs,
                self.outputs.len()
            ));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.function >= c.function_set.len() {
                return bad(format!("node {i}: function index {} invalid", node.function));
            }
            if node.connections.len() != c.arity || node.weights.len() != c.arity {
                return bad(format!("node {i}: arity mismatch"));
            }
            if let Some(&a) = node.connections.iter().find(|&&a| a >= c.num_inputs + i) {
                return bad(format!("node {i}: connection {a} is not feed-forward"));
            }
            if let Some(&w) = node.weights.iter().find(|&&w| !c.weight_range.contains(w)) {
                return bad(format!("node {i}: weight {w} outside the weight range"));
            }
        }
        if let Some(&a) = self.outputs.iter().find(|&&a| a >= c.address_count()) {
            return bad(format!("output binding {a} out of range"));
        }
        Ok(())
    }

    /// Indices of the nodes reachable backwards from the output bindings,
    /// in ascending order.
    pub fn active_nodes(&self) -> Vec<usize> {
        let n_in = self.config.num_inputs;
        let mut active = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self
            .outputs
            .iter()
            .filter(|&&a| a >= n_in)
            .map(|&a| a - n_in)
            .collect();
        while let Some(i) = stack.pop() {
            if active[i] {
                continue;
            }
            active[i] = true;
            for &a in &self.nodes[i].connections {
                if a >= n_in && !active[a - n_in] {
                    stack.push(a - n_in);
                }
            }
        }
        active
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect()
    }

    /// Compiles the output-reachable subgraph into an evaluation plan.
    pub fn decode_active(&self) -> ActiveNetwork {
        let c = &*self.config;
        let n_in = c.num_inputs;
        let active = self.active_nodes();
        // Maps a genotype address to its slot in the compact value buffer.
        let mut slot_of = vec![usize::MAX; c.address_count()];
        for (a, slot) in slot_of.iter_mut().enumerate().take(n_in) {
            *slot = a;
        }
        for (k, &i) in active.iter().enumerate() {
            slot_of[n_in + i] = n_in + k;
        }
        let mut functions = Vec::with_capacity(active.len());
        let mut sources = Vec::with_capacity(active.len() * c.arity);
        let mut weights = Vec::with_capacity(active.len() * c.arity);
        for &i in &active {
            let node = &self.nodes[i];
            functions.push(c.function_set[node.function]);
            sources.extend(node.connections.iter().map(|&a| slot_of[a]));
            weights.extend_from_slice(&node.weights);
        }
        let outputs = self.outputs.iter().map(|&a| slot_of[a]).collect();
        ActiveNetwork {
            num_inputs: n_in,
            arity: c.arity,
            active,
            functions,
            sources,
            weights,
            outputs,
        }
    }

    /// Evaluates every node, active or not, and reads the output bindings.
    /// Passive nodes cannot influence the result; this exists to check that
    /// claim against [`ActiveNetwork::forward`].
    pub fn evaluate_all(&self, state: &[f64]) -> Result<Vec<f64>> {
        let c = &*self.config;
        check_state(state, c.num_inputs)?;
        let mut values = Vec::with_capacity(c.address_count());
        values.extend_from_slice(state);
        for node in &self.nodes {
            let mut acc = 0.0;
            for (&a, &w) in node.connections.iter().zip(&node.weights) {
                acc += w * values[a];
            }
            values.push(c.function_set[node.function].apply(acc));
        }
        Ok(self.outputs.iter().map(|&a| values[a]).collect())
    }

    /// Re-samples every gene independently with probability `rate`.
    /// Output bindings are mutated at the same rate.
    pub fn mutate_random<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<Genotype> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mutation rate must be in (0, 1], got {rate}"
            )));
        }
        let mut child = self.clone();
        let c = &*self.config;
        for (i, node) in child.nodes.iter_mut().enumerate() {
            if rng.random::<f64>() < rate {
                node.function = rng.random_range(0..c.function_set.len());
            }
            for a in node.connections.iter_mut() {
                if rng.random::<f64>() < rate {
                    *a = rng.random_range(0..c.num_inputs + i);
                }
            }
            for w in node.weights.iter_mut() {
                if rng.random::<f64>() < rate {
                    *w = c.weight_range.sample(rng);
                }
            }
        }
        for o in child.outputs.iter_mut() {
            if rng.random::<f64>() < rate {
                *o = rng.random_range(0..c.address_count());
            }
        }
        Ok(child)
    }

    /// Mutates uniformly chosen genes until a gene of an active node (with
    /// respect to the parent) or an output binding changes value.
    pub fn mutate_single_active<R: Rng + ?Sized>(&self, rng: &mut R) -> Genotype {
        let c = &*self.config;
        let active: HashSet<usize> = self.active_nodes().into_iter().collect();
        let per_node = c.genes_per_node();
        let node_genes = c.num_nodes * per_node;
        let mut child = self.clone();
        loop {
            let gene = rng.random_range(0..c.gene_count());
            if gene >= node_genes {
                let o = gene - node_genes;
                let old = child.outputs[o];
                child.outputs[o] = rng.random_range(0..c.address_count());
                if child.outputs[o] != old {
                    return child;
                }
                continue;
            }
            let i = gene / per_node;
            let slot = gene % per_node;
            let node = &mut child.nodes[i];
            let changed = if slot == 0 {
                let old = node.function;
                node.function = rng.random_range(0..c.function_set.len());
                node.function != old
            } else if slot <= c.arity {
                let old = node.connections[slot - 1];
                node.connections[slot - 1] = rng.random_range(0..c.num_inputs + i);
                node.connections[slot - 1] != old
            } else {
                let j = slot - 1 - c.arity;
                let old = node.weights[j];
                node.weights[j] = c.weight_range.sample(rng);
                node.weights[j] != old
            };
            if changed && active.contains(&i) {
                return child;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Genotype = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

fn check_state(state: &[f64], num_inputs: usize) -> Result<()> {
    if state.len() != num_inputs {
        return Err(Error::LengthMismatch {
            expected: num_inputs,
            actual: state.len(),
        });
    }
    if let Some((index, &value)) = state.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index, value });
    }
    Ok(())
}

/// The decoded network: active nodes in feed-forward order with their
/// resolved functions, sources and weights.
///
/// Values live in a compact buffer of slots: slots `0..num_inputs` hold the
/// inputs, slot `num_inputs + k` holds the k-th active node. Duplicate
/// connections are kept as separate terms, so their contributions add up.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveNetwork {
    num_inputs: usize,
    arity: usize,
    active: Vec<usize>,
    functions: Vec<TransferFn>,
    sources: Vec<usize>,
    weights: Vec<f64>,
    outputs: Vec<usize>,
}

impl ActiveNetwork {
    /// Genotype indices of the active nodes, ascending.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn functions(&self) -> &[TransferFn] {
        &self.functions
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Slot each output reads from.
    pub fn output_slots(&self) -> &[usize] {
        &self.outputs
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_state(state, self.num_inputs)?;
        let mut values = Vec::with_capacity(self.num_inputs + self.active.len());
        values.extend_from_slice(state);
        for (k, f) in self.functions.iter().enumerate() {
            let span = k * self.arity..(k + 1) * self.arity;
            let mut acc = 0.0;
            for (&s, &w) in self.sources[span.clone()].iter().zip(&self.weights[span]) {
                acc += w * values[s];
            }
            values.push(f.apply(acc));
        }
        Ok(self.outputs.iter().map(|&s| values[s]).collect())
    }

    /// Evaluates the network on `states.len() / num_inputs` row-major
    /// states at once and returns the outputs row-major, one row per state.
    /// Bit-identical to calling [`forward`](Self::forward) per state.
    pub fn forward_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        let n_in = self.num_inputs;
        if !states.len().is_multiple_of(n_in) {
            return Err(Error::LengthMismatch {
                expected: states.len().div_ceil(n_in) * n_in,
                actual: states.len(),
            });
        }
        let n = states.len() / n_in;
        for (i, &v) in states.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput {
                    index: i % n_in,
                    value: v,
                });
            }
        }
        let slots = n_in + self.active.len();
        let mut values = vec![0.0; slots * n];
        for (s, row) in states.chunks_exact(n_in).enumerate() {
            for (d, &v) in row.iter().enumerate() {
                values[d * n + s] = v;
            }
        }
        for (k, f) in self.functions.iter().enumerate() {
            let (done, rest) = values.split_at_mut((n_in + k) * n);
            let acc = &mut rest[..n];
            let span = k * self.arity..(k + 1) * self.arity;
            for (&src, &w) in self.sources[span.clone()].iter().zip(&self.weights[span]) {
                let column = &done[src * n..(src + 1) * n];
                for (a, &x) in acc.iter_mut().zip(column) {
                    *a += w * x;
                }
            }
            for a in acc.iter_mut() {
                *a = f.apply(*a);
            }
        }
        let n_out = self.outputs.len();
        let mut out = vec![0.0; n * n_out];
        for (o, &slot) in self.outputs.iter().enumerate() {
            let column = &values[slot * n..(slot + 1) * n];
            for (s, &v) in column.iter().enumerate() {
                out[s * n_out + o] = v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Rng as SeededRng;
    use rand::SeedableRng;

    fn config(inputs: usize, outputs: usize, nodes: usize, arity: usize) -> Arc<CgpConfig> {
        Arc::new(
            CgpConfig::new(
                inputs,
                outputs,
                nodes,
                arity,
                WeightRange {
                    lower: -1.0,
                    upper: 1.0,
                },
                TransferFn::ALL.to_vec(),
            )
            .unwrap(),
        )
    }

    fn single_node(function: TransferFn, inputs: usize, conn: Vec<usize>, w: Vec<f64>) -> Genotype {
        let arity = conn.len();
        let cfg = Arc::new(
            CgpConfig::new(
                inputs,
                1,
                1,
                arity,
                WeightRange {
                    lower: -1.0,
                    upper: 1.0,
                },
                vec![function],
            )
            .unwrap(),
        );
        Genotype::from_parts(
            cfg,
            vec![NodeGene {
                function: 0,
                connections: conn,
                weights: w,
            }],
            vec![inputs],
        )
        .unwrap()
    }

    #[test]
    fn transfer_functions() {
        assert_eq!(TransferFn::Tanh.apply(0.0), 0.0);
        assert_eq!(TransferFn::Softsign.apply(0.5), 0.5 / 1.5);
        assert_eq!(TransferFn::Step.apply(0.0), 0.0);
        assert_eq!(TransferFn::Step.apply(1e-300), 1.0);
        assert_eq!(TransferFn::Sigmoid.apply(0.0), 0.5);
        assert_eq!(TransferFn::Gauss.apply(0.0), 1.0);
    }

    #[test]
    fn config_validation() {
        let w = WeightRange {
            lower: -1.0,
            upper: 1.0,
        };
        assert!(CgpConfig::new(2, 1, 0, 1, w, TransferFn::ALL.to_vec()).is_err());
        assert!(CgpConfig::new(2, 1, 1, 0, w, TransferFn::ALL.to_vec()).is_err());
        assert!(CgpConfig::new(2, 1, 1, 1, w, vec![]).is_err());
        let flipped = WeightRange {
            lower: 1.0,
            upper: 1.0,
        };
        assert!(CgpConfig::new(2, 1, 1, 1, flipped, TransferFn::ALL.to_vec()).is_err());
    }

    #[test]
    fn single_node_connects_to_inputs_only() {
        let cfg = config(2, 1, 1, 1);
        for seed in 0..200 {
            let g = Genotype::random(cfg.clone(), &mut SeededRng::seed_from_u64(seed));
            assert!(g.nodes()[0].connections[0] < 2);
        }
    }

    #[test]
    fn table_sized_genotype_gene_count() {
        let cfg = CgpConfig::for_env(EnvKind::CartPole);
        assert_eq!(cfg.gene_count(), 200 * (1 + 20 + 20) + 2);
        let g = Genotype::random(Arc::new(cfg), &mut SeededRng::seed_from_u64(1));
        let genes: usize = g
            .nodes()
            .iter()
            .map(|n| 1 + n.connections.len() + n.weights.len())
            .sum::<usize>()
            + g.outputs().len();
        assert_eq!(genes, 8202);
    }

    #[test]
    fn same_seed_same_genotype() {
        let cfg = config(4, 2, 50, 5);
        let a = Genotype::random(cfg.clone(), &mut SeededRng::seed_from_u64(9));
        let b = Genotype::random(cfg, &mut SeededRng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn outputs_on_inputs_give_empty_active_set() {
        let cfg = config(3, 2, 10, 2);
        let mut g = Genotype::random(cfg, &mut SeededRng::seed_from_u64(3));
        g.outputs = vec![0, 2];
        let net = g.decode_active();
        assert!(net.active_nodes().is_empty());
        assert_eq!(net.forward(&[0.1, 0.2, 0.3]).unwrap(), vec![0.1, 0.3]);
    }

    #[test]
    fn output_on_node_fed_by_inputs_only() {
        let cfg = config(2, 1, 8, 2);
        let mut g = Genotype::random(cfg, &mut SeededRng::seed_from_u64(4));
        g.nodes[5].connections = vec![0, 1];
        g.outputs = vec![2 + 5];
        assert_eq!(g.decode_active().active_nodes(), &[5]);
    }

    #[test]
    fn zero_weight_tanh_is_zero() {
        let g = single_node(TransferFn::Tanh, 2, vec![0, 1], vec![0.0, 0.0]);
        assert_eq!(g.decode_active().forward(&[0.7, -0.3]).unwrap(), vec![0.0]);
    }

    #[test]
    fn softsign_single_connection() {
        let g = single_node(TransferFn::Softsign, 1, vec![0], vec![1.0]);
        let out = g.decode_active().forward(&[0.5]).unwrap();
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn duplicate_connections_add_up() {
        let g = single_node(TransferFn::Softsign, 1, vec![0, 0], vec![0.25, 0.25]);
        let out = g.decode_active().forward(&[1.0]).unwrap();
        assert!((out[0] - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = single_node(TransferFn::Tanh, 2, vec![0, 1], vec![0.5, 0.5]);
        let net = g.decode_active();
        assert!(matches!(
            net.forward(&[0.0, f64::NAN]),
            Err(Error::NonFiniteInput { index: 1, .. })
        ));
        assert!(net.forward_batch(&[0.0, 0.0, f64::INFINITY, 0.0]).is_err());
        assert!(matches!(
            net.forward(&[0.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn batch_matches_single() {
        let cfg = config(4, 2, 60, 6);
        let mut rng = SeededRng::seed_from_u64(11);
        for _ in 0..20 {
            let g = Genotype::random(cfg.clone(), &mut rng);
            let net = g.decode_active();
            let states: Vec<f64> = (0..4 * 30).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let batch = net.forward_batch(&states).unwrap();
            let single: Vec<f64> = states
                .chunks(4)
                .flat_map(|s| net.forward(s).unwrap())
                .collect();
            assert_eq!(batch, single);
        }
    }

    #[test]
    fn rate_one_resamples_everything_validly() {
        let cfg = config(3, 2, 30, 4);
        let mut rng = SeededRng::seed_from_u64(5);
        let g = Genotype::random(cfg, &mut rng);
        let m = g.mutate_random(1.0, &mut rng).unwrap();
        m.validate().unwrap();
        let changed_weights = g
            .nodes()
            .iter()
            .zip(m.nodes())
            .flat_map(|(a, b)| a.weights.iter().zip(&b.weights))
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed_weights, 30 * 4);
    }

    #[test]
    fn invalid_rate_rejected() {
        let cfg = config(3, 2, 5, 2);
        let mut rng = SeededRng::seed_from_u64(5);
        let g = Genotype::random(cfg, &mut rng);
        assert!(g.mutate_random(0.0, &mut rng).is_err());
        assert!(g.mutate_random(1.5, &mut rng).is_err());
    }

    #[test]
    fn single_active_with_empty_active_set_changes_an_output() {
        let cfg = config(3, 2, 10, 2);
        let mut rng = SeededRng::seed_from_u64(8);
        let mut g = Genotype::random(cfg, &mut rng);
        g.outputs = vec![0, 1];
        for _ in 0..50 {
            let m = g.mutate_single_active(&mut rng);
            assert_ne!(m.outputs(), g.outputs());
        }
    }

    #[test]
    fn from_json_rejects_broken_invariants() {
        let cfg = config(2, 1, 3, 2);
        let mut g = Genotype::random(cfg, &mut SeededRng::seed_from_u64(2));
        g.nodes[0].connections[0] = 2;
        let json = serde_json::to_string(&g).unwrap();
        assert!(Genotype::from_json(&json).is_err());
    }
}
