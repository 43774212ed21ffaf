//! Union-find over colored balls with a unit rotation on every parent link.

use std::collections::HashMap;

use num_complex::Complex64;

/// Node handle inside a [`ColorForest`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Colors as disjoint sets. A ball's value is stored in the frame of the
/// component it joined; `rot[v]` maps v's frame into its parent's frame.
#[derive(Clone, Debug, Default)]
pub struct ColorForest {
    ball: Vec<u64>,
    value: Vec<Complex64>,
    parent: Vec<u32>,
    rot: Vec<Complex64>,
    size: Vec<u32>,
    node_of: HashMap<u64, u32>,
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl ColorForest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ball.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ball.is_empty()
    }

    pub fn node_of(&self, ball: u64) -> Option<NodeId> {
        self.node_of.get(&ball).map(|&v| NodeId(v))
    }

    pub fn contains(&self, ball: u64) -> bool {
        self.node_of.contains_key(&ball)
    }

    pub fn ball(&self, v: NodeId) -> u64 {
        self.ball[v.0 as usize]
    }

    /// Starts a new color holding one ball.
    pub fn add_root(&mut self, ball: u64, value: Complex64) -> NodeId {
        let id = self.ball.len() as u32;
        self.push(ball, value, id);
        NodeId(id)
    }

    /// Adds a ball to the color rooted at `root`; `value` is in the root's frame.
    pub fn add_to(&mut self, root: NodeId, ball: u64, value: Complex64) -> NodeId {
        debug_assert_eq!(self.parent[root.0 as usize], root.0);
        let id = self.ball.len() as u32;
        self.push(ball, value, root.0);
        self.size[root.0 as usize] += 1;
        NodeId(id)
    }

    fn push(&mut self, ball: u64, value: Complex64, parent: u32) {
        let id = self.ball.len() as u32;
        let previous = self.node_of.insert(ball, id);
        assert!(previous.is_none(), "ball {ball} colored twice");
        self.ball.push(ball);
        self.value.push(value);
        self.parent.push(parent);
        self.rot.push(ONE);
        self.size.push(1);
    }

    /// Root of `v` and the rotation taking v's frame to the root frame.
    pub fn find(&mut self, v: NodeId) -> (NodeId, Complex64) {
        let mut path = Vec::new();
        let mut cur = v.0;
        while self.parent[cur as usize] != cur {
            path.push(cur);
            cur = self.parent[cur as usize];
        }
        let root = cur;
        // Compress from the node nearest the root outwards.
        let mut acc = ONE;
        for &u in path.iter().rev() {
            acc *= self.rot[u as usize];
            self.rot[u as usize] = acc;
            self.parent[u as usize] = root;
        }
        let r = if path.is_empty() { ONE } else { self.rot[v.0 as usize] };
        (NodeId(root), r)
    }

    /// Root and value of `v` expressed in the root frame.
    pub fn resolve(&mut self, v: NodeId) -> (NodeId, Complex64) {
        let (root, r) = self.find(v);
        (root, r * self.value[v.0 as usize])
    }

    pub fn size(&self, root: NodeId) -> usize {
        self.size[root.0 as usize] as usize
    }

    /// Joins the colors of `a` and `b`. `rot` maps root-frame values of b's
    /// color into the root frame of a's color. Returns the new root.
    pub fn merge(&mut self, a: NodeId, b: NodeId, rot: Complex64) -> NodeId {
        let (ra, _) = self.find(a);
        let (rb, _) = self.find(b);
        if ra == rb {
            return ra;
        }
        let link = rot / rot.norm();
        let (big, small, r) = if self.size[ra.0 as usize] >= self.size[rb.0 as usize] {
            (ra, rb, link)
        } else {
            (rb, ra, link.conj())
        };
        self.parent[small.0 as usize] = big.0;
        self.rot[small.0 as usize] = r;
        self.size[big.0 as usize] += self.size[small.0 as usize];
        big
    }

    /// Root with the most balls; ties go to the root holding the smallest ball index.
    pub fn largest_root(&mut self) -> Option<NodeId> {
        let mut best: Option<(usize, u64, NodeId)> = None;
        for v in 0..self.ball.len() as u32 {
            if self.parent[v as usize] != v {
                continue;
            }
            let key = (self.size[v as usize] as usize, self.ball[v as usize]);
            let better = match best {
                None => true,
                Some((s, b, _)) => key.0 > s || (key.0 == s && key.1 < b),
            };
            if better {
                best = Some((key.0, key.1, NodeId(v)));
            }
        }
        best.map(|b| b.2)
    }

    /// Every ball of the color rooted at `root`, sorted by index, in the root frame.
    pub fn component(&mut self, root: NodeId) -> Vec<(u64, Complex64)> {
        let mut out = Vec::with_capacity(self.size(root));
        for v in 0..self.ball.len() as u32 {
            let (r, val) = self.resolve(NodeId(v));
            if r == root {
                out.push((self.ball[v as usize], val));
            }
        }
        out.sort_by_key(|e| e.0);
        out
    }

    /// Forest holding only the given balls as one color, plus the old-to-new
    /// node map (None for dropped nodes).
    pub fn restrict_to(&mut self, root: NodeId) -> (ColorForest, Vec<Option<NodeId>>) {
        let mut fresh = ColorForest::new();
        let mut map = vec![None; self.ball.len()];
        let mut new_root = None;
        for v in 0..self.ball.len() as u32 {
            let (r, val) = self.resolve(NodeId(v));
            if r != root {
                continue;
            }
            let ball = self.ball[v as usize];
            let id = match new_root {
                None => {
                    let id = fresh.add_root(ball, val);
                    new_root = Some(id);
                    id
                }
                Some(nr) => fresh.add_to(nr, ball, val),
            };
            map[v as usize] = Some(id);
        }
        (fresh, map)
    }

    /// Resident element count: nodes plus hash entries.
    pub fn resident(&self) -> usize {
        2 * self.ball.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cis(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    #[test]
    fn merge_rotates_whole_component() {
        let mut f = ColorForest::new();
        // Truth: x1 = 1, x2 = i, x3 = 2e^{0.4i}, x4 = -1.
        let a = f.add_root(1, Complex64::new(1.0, 0.0));
        f.add_to(a, 2, Complex64::new(0.0, 1.0));
        // Second color lives in a frame rotated by e^{-0.7i}.
        let b = f.add_root(3, 2.0 * cis(0.4 - 0.7));
        f.add_to(b, 4, -cis(-0.7));
        let r = f.merge(a, b, cis(0.7));
        assert_eq!(f.size(r), 4);
        let comp = f.component(r);
        let truth = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            2.0 * cis(0.4),
            Complex64::new(-1.0, 0.0),
        ];
        let g = truth[0] / comp[0].1;
        for (c, t) in comp.iter().zip(truth) {
            assert!((c.1 * g - t).norm() < 1e-14);
        }
    }

    #[test]
    fn ratios_survive_chains_of_merges() {
        let mut f = ColorForest::new();
        let roots: Vec<NodeId> = (1..=16).map(|i| f.add_root(i, cis(i as f64))).collect();
        // Merge so that every ball ends up with value e^{i*0} after alignment.
        for w in [1usize, 2, 4, 8] {
            for s in (0..16).step_by(2 * w) {
                let (a, b) = (roots[s], roots[s + w]);
                let (_, va) = f.resolve(a);
                let (_, vb) = f.resolve(b);
                f.merge(a, b, va / vb);
            }
        }
        let r = f.largest_root().unwrap();
        assert_eq!(f.size(r), 16);
        let comp = f.component(r);
        for c in &comp {
            assert!((c.1 - comp[0].1).norm() < 1e-13);
        }
    }

    #[test]
    fn largest_root_tie_break() {
        let mut f = ColorForest::new();
        f.add_root(9, Complex64::new(1.0, 0.0));
        f.add_root(3, Complex64::new(1.0, 0.0));
        let r = f.largest_root().unwrap();
        assert_eq!(f.ball(r), 3);
        assert!(ColorForest::new().largest_root().is_none());
    }

    #[test]
    fn restriction_keeps_one_color() {
        let mut f = ColorForest::new();
        let a = f.add_root(1, cis(PI / 5.0));
        f.add_to(a, 5, cis(1.0));
        f.add_root(2, cis(2.0));
        let (mut g, map) = f.restrict_to(a);
        assert_eq!(g.len(), 2);
        assert!(map[2].is_none());
        let r = g.largest_root().unwrap();
        assert_eq!(g.component(r).len(), 2);
        assert!(!g.contains(2));
    }
}
