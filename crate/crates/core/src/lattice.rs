//! Finite square lattices: vertices, directed links and plaquettes.
//!
//! Vertices are ordered row-major (`n2` major, `n1` minor). Links are ordered
//! by origin vertex, then by direction (`k = 1` before `k = 2`). Plaquettes are
//! indexed by their lower-left corner and list their links as
//! (bottom, right, top, left) = `(n,1), (n+1̂,2), (n+2̂,1), (n,2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            boundary: Boundary::Open,
        }
    }

    pub fn periodic(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            boundary: Boundary::Periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidLattice(format!(
                "width and height must be >= 1 (got {}x{})",
                self.width, self.height
            )));
        }
        if self.boundary == Boundary::Periodic && (self.width < 2 || self.height < 2) {
            return Err(Error::InvalidLattice(format!(
                "periodic boundary needs width >= 2 and height >= 2 (got {}x{})",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub n1: usize,
    pub n2: usize,
}

impl VertexId {
    pub const fn new(n1: usize, n2: usize) -> Self {
        Self { n1, n2 }
    }

    /// Staggering sign `(-1)^(n1+n2)`.
    pub fn parity(&self) -> i32 {
        vertex_parity(*self)
    }

    pub fn is_even(&self) -> bool {
        (self.n1 + self.n2) % 2 == 0
    }
}

/// `(-1)^(n1+n2)`.
pub fn vertex_parity(v: VertexId) -> i32 {
    if (v.n1 + v.n2) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Lattice direction `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// `k = 1`, along `n1`.
    One,
    /// `k = 2`, along `n2`.
    Two,
}

impl Direction {
    pub fn index(self) -> u8 {
        match self {
            Direction::One => 1,
            Direction::Two => 2,
        }
    }

    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            1 => Some(Direction::One),
            2 => Some(Direction::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub origin: VertexId,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Outgoing,
    Incoming,
}

/// The four links of a plaquette in (bottom, right, top, left) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub corner: VertexId,
    /// Link indices into [`LatticeGeometry::links`].
    pub links: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    pub spec: LatticeSpec,
    pub vertices: Vec<VertexId>,
    pub links: Vec<LinkId>,
    pub plaquettes: Vec<Plaquette>,
    // (vertex index, direction) -> link index
    outgoing: Vec<[Option<usize>; 2]>,
    stars: Vec<Vec<(usize, Orientation)>>,
}

pub fn build_lattice(spec: LatticeSpec) -> Result<LatticeGeometry> {
    LatticeGeometry::new(spec)
}

impl LatticeGeometry {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let (w, h) = (spec.width, spec.height);
        let vertices: Vec<VertexId> = (0..h)
            .flat_map(|n2| (0..w).map(move |n1| VertexId::new(n1, n2)))
            .collect();

        let mut links = Vec::new();
        let mut outgoing = vec![[None, None]; vertices.len()];
        for (vi, v) in vertices.iter().enumerate() {
            for (slot, dir) in [Direction::One, Direction::Two].into_iter().enumerate() {
                if Self::step_in(spec, *v, dir).is_some() {
                    outgoing[vi][slot] = Some(links.len());
                    links.push(LinkId {
                        origin: *v,
                        direction: dir,
                    });
                }
            }
        }

        let mut stars: Vec<Vec<(usize, Orientation)>> = vec![Vec::new(); vertices.len()];
        for (li, link) in links.iter().enumerate() {
            let from = link.origin.n2 * w + link.origin.n1;
            let to_v = Self::step_in(spec, link.origin, link.direction).expect("link endpoint");
            let to = to_v.n2 * w + to_v.n1;
            stars[from].push((li, Orientation::Outgoing));
            stars[to].push((li, Orientation::Incoming));
        }
        for star in &mut stars {
            // outgoing first, each group by direction
            star.sort_by_key(|(li, o)| (matches!(o, Orientation::Incoming), links[*li].direction));
        }

        let mut plaquettes = Vec::new();
        for (vi, v) in vertices.iter().enumerate() {
            let right = Self::step_in(spec, *v, Direction::One);
            let up = Self::step_in(spec, *v, Direction::Two);
            let (Some(r), Some(u)) = (right, up) else {
                continue;
            };
            let bottom = outgoing[vi][0];
            let left = outgoing[vi][1];
            let right_link = outgoing[r.n2 * w + r.n1][1];
            let top = outgoing[u.n2 * w + u.n1][0];
            if let (Some(b), Some(rl), Some(t), Some(l)) = (bottom, right_link, top, left) {
                plaquettes.push(Plaquette {
                    corner: *v,
                    links: [b, rl, t, l],
                });
            }
        }

        Ok(Self {
            spec,
            vertices,
            links,
            plaquettes,
            outgoing,
            stars,
        })
    }

    fn step_in(spec: LatticeSpec, v: VertexId, dir: Direction) -> Option<VertexId> {
        let (w, h) = (spec.width, spec.height);
        let (mut n1, mut n2) = (v.n1 + 1, v.n2 + 1);
        match dir {
            Direction::One => n2 -= 1,
            Direction::Two => n1 -= 1,
        }
        match spec.boundary {
            Boundary::Open => (n1 < w && n2 < h).then_some(VertexId::new(n1, n2)),
            Boundary::Periodic => Some(VertexId::new(n1 % w, n2 % h)),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn vertex_index(&self, v: VertexId) -> Result<usize> {
        if v.n1 < self.spec.width && v.n2 < self.spec.height {
            Ok(v.n2 * self.spec.width + v.n1)
        } else {
            Err(Error::UnknownVertex(v.n1 as i64, v.n2 as i64))
        }
    }

    /// Index of link `(v, k)`.
    pub fn link_index(&self, v: VertexId, dir: Direction) -> Result<usize> {
        let vi = self.vertex_index(v)?;
        let slot = match dir {
            Direction::One => 0,
            Direction::Two => 1,
        };
        self.outgoing[vi][slot].ok_or(Error::UnknownLink {
            n1: v.n1 as i64,
            n2: v.n2 as i64,
            direction: dir.index(),
        })
    }

    /// Vertex reached from `v` by one step along `dir`, if on the lattice.
    pub fn neighbor(&self, v: VertexId, dir: Direction) -> Option<VertexId> {
        Self::step_in(self.spec, v, dir)
    }

    /// End vertex index of link `li`.
    pub fn link_target(&self, li: usize) -> usize {
        let link = self.links[li];
        let t = Self::step_in(self.spec, link.origin, link.direction).expect("link endpoint");
        t.n2 * self.spec.width + t.n1
    }

    /// Origin vertex index of link `li`.
    pub fn link_source(&self, li: usize) -> usize {
        let o = self.links[li].origin;
        o.n2 * self.spec.width + o.n1
    }

    /// Parity of the link's origin vertex; the sign change acts on links with
    /// odd origin.
    pub fn link_parity(&self, li: usize) -> i32 {
        vertex_parity(self.links[li].origin)
    }

    /// Links entering the Gauss generator at vertex index `vi`: outgoing
    /// `(v, k)` and incoming `(v - k̂, k)`. Links missing at open boundaries
    /// are omitted.
    pub fn star(&self, vi: usize) -> &[(usize, Orientation)] {
        &self.stars[vi]
    }

    pub fn star_links(&self, v: VertexId) -> Result<Vec<(LinkId, Orientation)>> {
        let vi = self.vertex_index(v)?;
        Ok(self.stars[vi]
            .iter()
            .map(|(li, o)| (self.links[*li], *o))
            .collect())
    }

    /// All unordered pairs of distinct links that share a vertex.
    pub fn intersecting_link_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for star in &self.stars {
            for (a, (la, _)) in star.iter().enumerate() {
                for (lb, _) in &star[a + 1..] {
                    if la != lb {
                        pairs.push(((*la).min(*lb), (*la).max(*lb)));
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Whether the staggering sign is consistent across every link, i.e. the
    /// two ends of each link have opposite parity.
    pub fn is_bipartite(&self) -> bool {
        (0..self.links.len()).all(|li| {
            let s = self.link_source(li);
            let t = self.link_target(li);
            vertex_parity(self.vertices[s]) != vertex_parity(self.vertices[t])
        })
    }

    pub fn describe(&self) -> String {
        let b = match self.spec.boundary {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        };
        format!("{}x{}-{}", self.spec.width, self.spec.height, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_small_lattices() {
        let g = build_lattice(LatticeSpec::open(2, 2)).unwrap();
        assert_eq!((g.num_vertices(), g.num_links(), g.plaquettes.len()), (4, 4, 1));

        let g = build_lattice(LatticeSpec::open(1, 1)).unwrap();
        assert_eq!((g.num_vertices(), g.num_links(), g.plaquettes.len()), (1, 0, 0));

        let g = build_lattice(LatticeSpec::periodic(2, 2)).unwrap();
        assert_eq!((g.num_vertices(), g.num_links(), g.plaquettes.len()), (4, 8, 4));
    }

    #[test]
    fn link_count_formulas() {
        for w in 1..5 {
            for h in 1..5 {
                let g = build_lattice(LatticeSpec::open(w, h)).unwrap();
                assert_eq!(g.num_links(), h * (w - 1) + w * (h - 1));
                assert_eq!(g.plaquettes.len(), (w - 1) * (h - 1));
                if w >= 2 && h >= 2 {
                    let g = build_lattice(LatticeSpec::periodic(w, h)).unwrap();
                    assert_eq!(g.num_links(), 2 * w * h);
                    assert_eq!(g.plaquettes.len(), w * h);
                }
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_lattice(LatticeSpec::open(0, 3)).is_err());
        assert!(build_lattice(LatticeSpec::periodic(1, 3)).is_err());
    }

    #[test]
    fn parity() {
        assert_eq!(vertex_parity(VertexId::new(0, 0)), 1);
        assert_eq!(vertex_parity(VertexId::new(1, 0)), -1);
        assert_eq!(vertex_parity(VertexId::new(1, 1)), 1);
    }

    #[test]
    fn stars() {
        let g = build_lattice(LatticeSpec::open(3, 3)).unwrap();
        let s = g.star_links(VertexId::new(1, 1)).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().filter(|(_, o)| *o == Orientation::Outgoing).count(), 2);

        let g = build_lattice(LatticeSpec::open(2, 2)).unwrap();
        let s = g.star_links(VertexId::new(0, 0)).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|(_, o)| *o == Orientation::Outgoing));

        let g = build_lattice(LatticeSpec::periodic(2, 2)).unwrap();
        for v in &g.vertices {
            assert_eq!(g.star_links(*v).unwrap().len(), 4);
        }
    }

    #[test]
    fn periodic_links_appear_once_out_once_in() {
        let g = build_lattice(LatticeSpec::periodic(3, 4)).unwrap();
        for li in 0..g.num_links() {
            let mut out = 0;
            let mut inc = 0;
            for vi in 0..g.num_vertices() {
                for (l, o) in g.star(vi) {
                    if *l == li {
                        match o {
                            Orientation::Outgoing => out += 1,
                            Orientation::Incoming => inc += 1,
                        }
                    }
                }
            }
            assert_eq!((out, inc), (1, 1));
        }
    }

    #[test]
    fn plaquette_corners_consistent() {
        let g = build_lattice(LatticeSpec::open(3, 2)).unwrap();
        for p in &g.plaquettes {
            let [b, r, t, l] = p.links;
            assert_eq!(g.link_source(b), g.link_source(l));
            assert_eq!(g.link_target(b), g.link_source(r));
            assert_eq!(g.link_target(l), g.link_source(t));
            assert_eq!(g.link_target(t), g.link_target(r));
        }
        // interior links belong to at most two plaquettes
        for li in 0..g.num_links() {
            let n = g.plaquettes.iter().filter(|p| p.links.contains(&li)).count();
            assert!(n <= 2);
        }
    }

    #[test]
    fn periodic_links_belong_to_two_plaquettes() {
        let g = build_lattice(LatticeSpec::periodic(3, 3)).unwrap();
        for li in 0..g.num_links() {
            let n = g.plaquettes.iter().filter(|p| p.links.contains(&li)).count();
            assert_eq!(n, 2);
        }
    }

    #[test]
    fn deterministic_orderings() {
        let a = build_lattice(LatticeSpec::open(3, 2)).unwrap();
        let b = build_lattice(LatticeSpec::open(3, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vertices[1], VertexId::new(1, 0));
        assert_eq!(a.links[0].direction, Direction::One);
        assert_eq!(a.links[1].direction, Direction::Two);
    }

    #[test]
    fn intersecting_pairs_interior_vertex() {
        let g = build_lattice(LatticeSpec::open(3, 3)).unwrap();
        let center = g.vertex_index(VertexId::new(1, 1)).unwrap();
        let star: Vec<usize> = g.star(center).iter().map(|(l, _)| *l).collect();
        let pairs = g.intersecting_link_pairs();
        let at_center = pairs
            .iter()
            .filter(|(a, b)| star.contains(a) && star.contains(b))
            .count();
        assert_eq!(at_center, 6);
        let single = build_lattice(LatticeSpec::open(2, 2)).unwrap();
        assert_eq!(single.intersecting_link_pairs().len(), 4);
    }
}
