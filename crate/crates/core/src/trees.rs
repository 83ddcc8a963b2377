//! Rooted trees, free trees (root-shift classes) and Runge-Kutta elementary
//! weights, used to evaluate the B-series energy-preservation conditions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// Canonical rooted tree: children sorted ascending in the tree order.
///
/// Trees are ordered by vertex count first, then lexicographically by their
/// (sorted) child lists.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RootedTree {
    children: Vec<RootedTree>,
    size: usize,
}

impl Ord for RootedTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size
            .cmp(&other.size)
            .then_with(|| self.children.cmp(&other.children))
    }
}

impl PartialOrd for RootedTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RootedTree {
    /// The one-vertex tree `•`.
    pub fn leaf() -> Self {
        RootedTree {
            children: Vec::new(),
            size: 1,
        }
    }

    /// `[t_1, ..., t_k]`: a new root with the given subtrees.
    pub fn graft(mut children: Vec<RootedTree>) -> Self {
        children.sort();
        let size = 1 + children.iter().map(|c| c.size).sum::<usize>();
        RootedTree { children, size }
    }

    /// The bushy tree `[•^k]`.
    pub fn bush(k: usize) -> Self {
        Self::graft(vec![Self::leaf(); k])
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    /// `B_-(t)`: the forest of subtrees hanging off the root.
    pub fn b_minus(&self) -> Forest {
        Forest(self.children.clone())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Symmetry coefficient `σ(t) = Π r_i! σ(t_i)^{r_i}`.
    pub fn sigma(&self) -> u64 {
        let mut out = 1u64;
        let mut run = 0u64;
        for (i, c) in self.children.iter().enumerate() {
            run = if i > 0 && self.children[i - 1] == *c { run + 1 } else { 1 };
            out *= run * c.sigma();
        }
        out
    }

    /// Largest vertex degree of the underlying graph.
    pub fn max_degree(&self) -> usize {
        fn walk(t: &RootedTree, has_parent: bool) -> usize {
            let own = t.children.len() + usize::from(has_parent);
            t.children.iter().map(|c| walk(c, true)).fold(own, usize::max)
        }
        walk(self, false)
    }

    /// Butcher product `u ∘ v = [u_1 ... u_q v]`.
    pub fn butcher_product(&self, v: &RootedTree) -> RootedTree {
        let mut children = self.children.clone();
        children.push(v.clone());
        Self::graft(children)
    }

    /// All trees obtained by moving the root to one of its children.
    ///
    /// Writing `t = u ∘ v` with `v` a child of the root, the shift gives `v ∘ u`.
    pub fn root_shifts(&self) -> Vec<RootedTree> {
        let mut out = Vec::new();
        for i in 0..self.children.len() {
            if i > 0 && self.children[i] == self.children[i - 1] {
                continue;
            }
            let (u, v) = self.split_child(i);
            out.push(v.butcher_product(&u));
        }
        out
    }

    fn split_child(&self, i: usize) -> (RootedTree, RootedTree) {
        let mut rest = self.children.clone();
        let v = rest.remove(i);
        (Self::graft(rest), v)
    }

    /// Whether the tree factors as `u ∘ u`.
    pub fn is_self_product(&self) -> bool {
        (0..self.children.len()).any(|i| {
            let (u, v) = self.split_child(i);
            u == v
        })
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return f.write_str("*");
        }
        f.write_str("[")?;
        for (i, c) in self.children.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for RootedTree {
    type Err = Error;

    /// Bracket notation: `*` is a leaf, `[t1,t2,...]` a root with subtrees.
    fn from_str(s: &str) -> Result<Self> {
        fn parse(bytes: &[u8], pos: &mut usize) -> Result<RootedTree> {
            match bytes.get(*pos) {
                Some(b'*') => {
                    *pos += 1;
                    Ok(RootedTree::leaf())
                }
                Some(b'[') => {
                    *pos += 1;
                    let mut children = Vec::new();
                    loop {
                        children.push(parse(bytes, pos)?);
                        match bytes.get(*pos) {
                            Some(b',') => *pos += 1,
                            Some(b']') => {
                                *pos += 1;
                                return Ok(RootedTree::graft(children));
                            }
                            _ => return Err(Error::Parse(format!("expected ',' or ']' at {}", *pos))),
                        }
                    }
                }
                _ => Err(Error::Parse(format!("expected '*' or '[' at {}", *pos))),
            }
        }
        let compact: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut pos = 0;
        let t = parse(&compact, &mut pos)?;
        if pos != compact.len() {
            return Err(Error::Parse(format!("trailing input after tree at {pos}")));
        }
        Ok(t)
    }
}

/// Unordered collection of rooted trees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest(pub Vec<RootedTree>);

impl Forest {
    pub fn order(&self) -> usize {
        self.0.iter().map(RootedTree::size).sum()
    }
}

/// All rooted trees with exactly `n` vertices, in ascending canonical order.
pub fn enumerate_rooted(n: usize) -> Vec<RootedTree> {
    let mut by_size: Vec<Vec<RootedTree>> = vec![Vec::new(), vec![RootedTree::leaf()]];
    for k in 2..=n {
        let mut trees = Vec::new();
        let mut stack = Vec::new();
        forests(k - 1, None, &by_size, &mut stack, &mut |f| {
            trees.push(RootedTree::graft(f.to_vec()))
        });
        trees.sort();
        by_size.push(trees);
    }
    if n == 0 {
        return Vec::new();
    }
    by_size.swap_remove(n)
}

/// Multisets of trees with total size `total`, emitted with members in
/// non-increasing order so each multiset appears once.
fn forests<'a>(
    total: usize,
    max: Option<&'a RootedTree>,
    by_size: &'a [Vec<RootedTree>],
    stack: &mut Vec<RootedTree>,
    emit: &mut dyn FnMut(&[RootedTree]),
) {
    if total == 0 {
        emit(stack);
        return;
    }
    for size in (1..=total).rev() {
        for t in by_size[size].iter().rev() {
            if max.is_some_and(|m| t > m) {
                continue;
            }
            stack.push(t.clone());
            forests(total - size, Some(t), by_size, stack, emit);
            stack.pop();
        }
    }
}

/// Root-shift equivalence class of a rooted tree.
#[derive(Clone, Debug)]
pub struct FreeTree {
    /// Members in ascending canonical order; the first is the designated tree.
    pub members: Vec<RootedTree>,
    /// `(-1)^κ(designated, member)`, aligned with `members`.
    pub parity: Vec<i8>,
    pub superfluous: bool,
}

impl FreeTree {
    pub fn designated(&self) -> &RootedTree {
        &self.members[0]
    }

    pub fn order(&self) -> usize {
        self.members[0].size()
    }

    pub fn branching(&self) -> usize {
        self.members[0].max_degree()
    }

    pub fn contains(&self, t: &RootedTree) -> bool {
        self.members.binary_search(t).is_ok()
    }
}

impl fmt::Display for FreeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.designated())
    }
}

/// Collect the class of `t` by breadth-first search over single root shifts.
///
/// Parities are tracked along the search. A member reached with both
/// parities can only occur when the tree is symmetric across an edge, i.e.
/// in a superfluous class; anywhere else it is reported as an error.
pub fn free_class(t: &RootedTree) -> Result<FreeTree> {
    let mut seen: BTreeMap<RootedTree, i8> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut conflict = false;
    seen.insert(t.clone(), 1);
    queue.push_back(t.clone());
    while let Some(u) = queue.pop_front() {
        let pu = seen[&u];
        for v in u.root_shifts() {
            match seen.get(&v) {
                Some(&pv) => conflict |= pv != -pu,
                None => {
                    seen.insert(v.clone(), -pu);
                    queue.push_back(v);
                }
            }
        }
    }
    let superfluous = seen.keys().any(RootedTree::is_self_product);
    if conflict && !superfluous {
        return Err(Error::Structure(format!(
            "inconsistent root-shift parity in the class of {t}"
        )));
    }
    let members: Vec<RootedTree> = seen.keys().cloned().collect();
    let base = seen[&members[0]];
    let parity = members.iter().map(|m| seen[m] * base).collect();
    Ok(FreeTree {
        members,
        parity,
        superfluous,
    })
}

/// All free trees with `n` vertices (each as its class).
pub fn enumerate_free(n: usize) -> Result<Vec<FreeTree>> {
    let mut covered = BTreeSet::new();
    let mut out = Vec::new();
    for t in enumerate_rooted(n) {
        if covered.contains(&t) {
            continue;
        }
        let class = free_class(&t)?;
        covered.extend(class.members.iter().cloned());
        out.push(class);
    }
    Ok(out)
}

/// The double bush `t_{p,q}`: two adjacent vertices carrying `p` and `q` leaves.
pub fn double_bush(p: usize, q: usize) -> RootedTree {
    RootedTree::bush(p).butcher_product(&RootedTree::bush(q))
}

/// Butcher tableau `(A, b, c)` in working precision.
#[derive(Clone, Debug)]
pub struct ButcherTableau {
    pub a: Matrix,
    pub b: Vec<Real>,
    pub c: Vec<Real>,
}

impl ButcherTableau {
    pub fn new(a: Matrix, b: Vec<Real>, c: Vec<Real>) -> Result<Self> {
        let s = b.len();
        if a.nrows() != s || a.ncols() != s || c.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: a.nrows().max(a.ncols()).max(c.len()),
            });
        }
        Ok(ButcherTableau { a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn precision(&self) -> u32 {
        self.b[0].precision()
    }

    /// `max_i |Σ_j a_ij - c_i|`.
    pub fn row_sum_defect(&self) -> Real {
        let ones = vec![Real::one(self.precision()); self.stages()];
        let sums = self.a.mul_vec(&ones);
        let diffs: Vec<Real> = sums.iter().zip(&self.c).map(|(x, y)| x - y).collect();
        Real::max_abs(&diffs, self.precision())
    }

    pub fn a_f64(&self) -> Vec<Vec<f64>> {
        self.a.to_f64()
    }

    pub fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(Real::to_f64).collect()
    }

    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(Real::to_f64).collect()
    }

    /// Stage vector `Φ(t)`: `Φ(•) = 1`, `Φ([t_1..t_k]) = Π_i A Φ(t_i)`.
    pub fn stage_weights(&self, t: &RootedTree) -> Vec<Real> {
        let mut out = vec![Real::one(self.precision()); self.stages()];
        for child in t.children() {
            let inner = self.a.mul_vec(&self.stage_weights(child));
            for (o, x) in out.iter_mut().zip(&inner) {
                *o *= x;
            }
        }
        out
    }

    /// Elementary weight `a(t) = b^T Φ(t)`.
    pub fn elementary_weight(&self, t: &RootedTree) -> Real {
        crate::linalg::dot(&self.b, &self.stage_weights(t))
    }
}

/// `a(τ) = Π a(t_i)` over the forest members.
pub fn rk_weight(forest: &Forest, tab: &ButcherTableau) -> Real {
    forest
        .0
        .iter()
        .fold(Real::one(tab.precision()), |acc, t| acc * tab.elementary_weight(t))
}

/// `Σ_u (-1)^κ(t,u) / σ(u) · a(B_-(u))` over the class; zero for superfluous classes.
pub fn energy_condition_residual(ft: &FreeTree, tab: &ButcherTableau) -> Real {
    let prec = tab.precision();
    let mut acc = Real::zero(prec);
    if ft.superfluous {
        return acc;
    }
    for (u, &sign) in ft.members.iter().zip(&ft.parity) {
        let term = rk_weight(&u.b_minus(), tab) / Real::from_i64(u.sigma() as i64, prec);
        if sign > 0 {
            acc += &term;
        } else {
            acc -= &term;
        }
    }
    acc
}

/// Non-superfluous free trees with `2..=n+1` vertices and vertex degree at most `m`.
pub fn conditions_up_to(n: usize, m: usize) -> Result<Vec<FreeTree>> {
    let mut out = Vec::new();
    for k in 2..=n + 1 {
        for ft in enumerate_free(k)? {
            if !ft.superfluous && ft.branching() <= m {
                out.push(ft);
            }
        }
    }
    Ok(out)
}
