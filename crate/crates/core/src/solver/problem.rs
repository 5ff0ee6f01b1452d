//! Block-structured description of a nonlinear program.
//!
//! A program is a sum of cost blocks plus equality (`= 0`) and inequality
//! (`<= 0`) blocks. Each block reads a small list of decision variables, which
//! lets the solver differentiate locally and assemble sparse curvature.

use crate::model::Bound;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Scalar term added to the objective (`n_out == 1`).
    Cost,
    Equality,
    Inequality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub kind: BlockKind,
    /// Global indices of the variables the block reads, in local order.
    pub vars: Vec<usize>,
    pub n_out: usize,
}

/// A nonlinear program the solver can minimize.
pub trait Problem {
    fn n_vars(&self) -> usize;

    fn blocks(&self) -> &[BlockSpec];

    /// Evaluates block `block` at `local` (values of `blocks()[block].vars`).
    fn eval_block(&self, block: usize, local: &[f64], out: &mut [f64]);

    /// Per-variable bounds; defaults to unbounded.
    fn bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE; self.n_vars()]
    }

    /// Optional analytic Jacobian of a block, row-major `n_out x vars.len()`.
    /// Return `false` to fall back to finite differences.
    fn block_jacobian(&self, _block: usize, _local: &[f64], _jac: &mut [f64]) -> bool {
        false
    }
}

pub(crate) fn gather(x: &[f64], vars: &[usize], local: &mut Vec<f64>) {
    local.clear();
    local.extend(vars.iter().map(|&i| x[i]));
}

/// Sum of all cost blocks at `x`.
pub fn eval_cost<P: Problem + ?Sized>(p: &P, x: &[f64]) -> f64 {
    let mut local = Vec::new();
    let mut out = [0.0];
    let mut total = 0.0;
    for (b, spec) in p.blocks().iter().enumerate() {
        if spec.kind == BlockKind::Cost {
            gather(x, &spec.vars, &mut local);
            p.eval_block(b, &local, &mut out);
            total += out[0];
        }
    }
    total
}

/// Concatenated outputs of all blocks of `kind`, in block order.
pub fn eval_constraints<P: Problem + ?Sized>(p: &P, x: &[f64], kind: BlockKind) -> Vec<f64> {
    let mut local = Vec::new();
    let mut values = Vec::new();
    for (b, spec) in p.blocks().iter().enumerate() {
        if spec.kind == kind {
            gather(x, &spec.vars, &mut local);
            let start = values.len();
            values.resize(start + spec.n_out, 0.0);
            p.eval_block(b, &local, &mut values[start..]);
        }
    }
    values
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A program given by whole-vector closures: one block per role.
pub struct DenseProblem {
    n: usize,
    cost: ScalarFn,
    eq: Option<VectorFn>,
    ineq: Option<VectorFn>,
    bounds: Vec<Bound>,
    blocks: Vec<BlockSpec>,
}

impl DenseProblem {
    pub fn new(n: usize, cost: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        DenseProblem {
            n,
            cost: Box::new(cost),
            eq: None,
            ineq: None,
            bounds: vec![Bound::FREE; n],
            blocks: vec![BlockSpec {
                kind: BlockKind::Cost,
                vars: (0..n).collect(),
                n_out: 1,
            }],
        }
    }

    pub fn with_equalities(
        mut self,
        count: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.eq = Some(Box::new(f));
        self.blocks.push(BlockSpec {
            kind: BlockKind::Equality,
            vars: (0..self.n).collect(),
            n_out: count,
        });
        self
    }

    pub fn with_inequalities(
        mut self,
        count: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.ineq = Some(Box::new(f));
        self.blocks.push(BlockSpec {
            kind: BlockKind::Inequality,
            vars: (0..self.n).collect(),
            n_out: count,
        });
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Self {
        assert_eq!(bounds.len(), self.n, "one bound per variable");
        self.bounds = bounds;
        self
    }
}

impl Problem for DenseProblem {
    fn n_vars(&self) -> usize {
        self.n
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn eval_block(&self, block: usize, local: &[f64], out: &mut [f64]) {
        match self.blocks[block].kind {
            BlockKind::Cost => out[0] = (self.cost)(local),
            BlockKind::Equality => (self.eq.as_ref().expect("equality block"))(local, out),
            BlockKind::Inequality => (self.ineq.as_ref().expect("inequality block"))(local, out),
        }
    }

    fn bounds(&self) -> Vec<Bound> {
        self.bounds.clone()
    }
}
