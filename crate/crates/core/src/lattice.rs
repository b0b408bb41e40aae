//! Torus geometry for the toric code game.
//!
//! Bonds of an `lx x ly` square lattice with periodic boundaries are numbered
//! `orientation * (lx * ly) + y * lx + x`, horizontal bonds first. The
//! horizontal bond `h(x, y)` joins vertex `(x, y)` to `(x + 1, y)`, the
//! vertical bond `v(x, y)` joins `(x, y)` to `(x, y + 1)`. Face `(x, y)` has
//! corners `(x, y)` and `(x + 1, y + 1)`.
//!
//! Loops carry an orientation sign per bond. For a direct loop the sign is
//! `+1` when the bond is traversed along its own orientation (right for
//! horizontal bonds, up for vertical ones). For a dual loop the sign records
//! the crossing direction: `+1` for crossing a vertical bond rightward or a
//! horizontal bond downward. With these conventions clock strings on direct
//! loops commute with every star and shift strings on dual loops commute with
//! every plaquette, for any modulus.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BondId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A decoded bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub orientation: Orientation,
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    lx: usize,
    ly: usize,
}

impl TorusLattice {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidLattice { lx, ly });
        }
        Ok(Self { lx, ly })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn num_bonds(&self) -> usize {
        2 * self.lx * self.ly
    }

    pub fn num_plaquettes(&self) -> usize {
        self.lx * self.ly
    }

    pub fn num_stars(&self) -> usize {
        self.lx * self.ly
    }

    /// Bond id for in-range coordinates. Coordinates are reduced modulo the
    /// lattice size, so `x + lx - 1` can be used for `x - 1`.
    pub fn bond_id(&self, orientation: Orientation, x: usize, y: usize) -> BondId {
        let o = match orientation {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
        };
        o * self.lx * self.ly + (y % self.ly) * self.lx + (x % self.lx)
    }

    pub fn h(&self, x: usize, y: usize) -> BondId {
        self.bond_id(Orientation::Horizontal, x, y)
    }

    pub fn v(&self, x: usize, y: usize) -> BondId {
        self.bond_id(Orientation::Vertical, x, y)
    }

    pub fn bond(&self, id: BondId) -> Result<Bond> {
        self.check_bond(id)?;
        let cells = self.lx * self.ly;
        let orientation = if id < cells {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        let rem = id % cells;
        Ok(Bond {
            orientation,
            x: rem % self.lx,
            y: rem / self.lx,
        })
    }

    pub fn check_bond(&self, id: BondId) -> Result<()> {
        if id >= self.num_bonds() {
            return Err(Error::BondOutOfRange {
                bond: id,
                num_bonds: self.num_bonds(),
            });
        }
        Ok(())
    }

    fn check_coords(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.lx || y >= self.ly {
            return Err(Error::OutOfRange {
                x,
                y,
                lx: self.lx,
                ly: self.ly,
            });
        }
        Ok(())
    }

    pub fn vertex_index(&self, x: usize, y: usize) -> usize {
        (y % self.ly) * self.lx + (x % self.lx)
    }

    pub fn face_index(&self, x: usize, y: usize) -> usize {
        self.vertex_index(x, y)
    }

    /// Tail and head vertex indices of a bond.
    fn endpoints(&self, id: BondId) -> (usize, usize) {
        let b = self.bond(id).expect("bond id checked by caller");
        let tail = self.vertex_index(b.x, b.y);
        let head = match b.orientation {
            Orientation::Horizontal => self.vertex_index(b.x + 1, b.y),
            Orientation::Vertical => self.vertex_index(b.x, b.y + 1),
        };
        (tail, head)
    }

    /// Faces on either side of a bond: (left, right) for vertical bonds,
    /// (below, above) for horizontal bonds.
    fn sides(&self, id: BondId) -> (usize, usize) {
        let b = self.bond(id).expect("bond id checked by caller");
        match b.orientation {
            Orientation::Vertical => (
                self.face_index(b.x + self.lx - 1, b.y),
                self.face_index(b.x, b.y),
            ),
            Orientation::Horizontal => (
                self.face_index(b.x, b.y + self.ly - 1),
                self.face_index(b.x, b.y),
            ),
        }
    }

    /// The four bonds bounding face `(x, y)`: `h(x,y), h(x,y+1), v(x,y), v(x+1,y)`.
    pub fn plaquette_bonds(&self, x: usize, y: usize) -> Result<[BondId; 4]> {
        self.check_coords(x, y)?;
        Ok([self.h(x, y), self.h(x, y + 1), self.v(x, y), self.v(x + 1, y)])
    }

    /// Counterclockwise boundary of face `(x, y)` with traversal signs.
    /// North and west bonds carry `-1`.
    pub fn plaquette_boundary(&self, x: usize, y: usize) -> Result<[(BondId, i8); 4]> {
        self.check_coords(x, y)?;
        Ok([
            (self.h(x, y), 1),
            (self.v(x + 1, y), 1),
            (self.h(x, y + 1), -1),
            (self.v(x, y), -1),
        ])
    }

    /// The four bonds at vertex `(x, y)`: `h(x-1,y), h(x,y), v(x,y-1), v(x,y)`.
    pub fn star_bonds(&self, x: usize, y: usize) -> Result<[BondId; 4]> {
        self.check_coords(x, y)?;
        Ok([
            self.h(x + self.lx - 1, y),
            self.h(x, y),
            self.v(x, y + self.ly - 1),
            self.v(x, y),
        ])
    }

    /// Star at `(x, y)` as a coboundary: outgoing bonds `+1`, incoming `-1`.
    pub fn star_coboundary(&self, x: usize, y: usize) -> Result<[(BondId, i8); 4]> {
        self.check_coords(x, y)?;
        Ok([
            (self.h(x + self.lx - 1, y), -1),
            (self.h(x, y), 1),
            (self.v(x, y + self.ly - 1), -1),
            (self.v(x, y), 1),
        ])
    }

    /// Direct loop of all vertical bonds in column `x`, oriented upward.
    pub fn column_loop(&self, x: usize) -> Result<Loop> {
        self.check_coords(x, 0)?;
        Loop::direct(self, (0..self.ly).map(|y| self.v(x, y)))
    }

    /// Direct loop of all horizontal bonds in row `y`, oriented rightward.
    pub fn row_loop(&self, y: usize) -> Result<Loop> {
        self.check_coords(0, y)?;
        Loop::direct(self, (0..self.lx).map(|x| self.h(x, y)))
    }

    /// Dual loop crossing every vertical bond of row `y`, oriented rightward.
    pub fn row_dual_loop(&self, y: usize) -> Result<Loop> {
        self.check_coords(0, y)?;
        Loop::dual(self, (0..self.lx).map(|x| self.v(x, y)))
    }

    /// Dual loop crossing every horizontal bond of column `x`.
    pub fn column_dual_loop(&self, x: usize) -> Result<Loop> {
        self.check_coords(x, 0)?;
        Loop::dual(self, (0..self.ly).map(|y| self.h(x, y)))
    }

    /// Winding numbers `(wx, wy)` from signed crossings of fixed cuts.
    ///
    /// Direct loops are cut at `x = lx - 1/2` and `y = ly - 1/2`; dual loops,
    /// living on the dual lattice, are cut along `x = 0` and `y = 0`.
    pub fn homology_class(&self, lp: &Loop) -> Result<(i64, i64)> {
        if !self.is_closed(lp)? {
            return Err(Error::InvalidLoop(format!(
                "{} loop is not closed",
                lp.kind.as_str()
            )));
        }
        Ok(self.winding(lp.bonds.iter().copied().zip(lp.signs.iter().copied()), lp.kind))
    }

    fn winding(&self, bonds: impl Iterator<Item = (BondId, i8)>, kind: LoopKind) -> (i64, i64) {
        let (mut wx, mut wy) = (0i64, 0i64);
        for (id, s) in bonds {
            let b = self.bond(id).expect("bond checked");
            let s = s as i64;
            match (kind, b.orientation) {
                (LoopKind::Direct, Orientation::Horizontal) if b.x == self.lx - 1 => wx += s,
                (LoopKind::Direct, Orientation::Vertical) if b.y == self.ly - 1 => wy += s,
                (LoopKind::Dual, Orientation::Vertical) if b.x == 0 => wx += s,
                (LoopKind::Dual, Orientation::Horizontal) if b.y == 0 => wy += s,
                _ => {}
            }
        }
        (wx, wy)
    }

    /// Even-degree test: every vertex (direct) or face (dual) is touched an
    /// even number of times.
    pub fn is_closed(&self, lp: &Loop) -> Result<bool> {
        let mut count = vec![0usize; self.lx * self.ly];
        for &b in &lp.bonds {
            self.check_bond(b)?;
            let (a, c) = match lp.kind {
                LoopKind::Direct => self.endpoints(b),
                LoopKind::Dual => self.sides(b),
            };
            count[a] += 1;
            count[c] += 1;
        }
        Ok(count.iter().all(|c| c % 2 == 0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopKind {
    /// Lives on lattice bonds; clock (Z-type) operators.
    Direct,
    /// Lives on the dual lattice; shift (X-type) operators.
    Dual,
}

impl LoopKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LoopKind::Direct => "direct",
            LoopKind::Dual => "dual",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Loop {
    kind: LoopKind,
    bonds: Vec<BondId>,
    signs: Vec<i8>,
}

impl Loop {
    pub fn direct(lattice: &TorusLattice, bonds: impl IntoIterator<Item = BondId>) -> Result<Self> {
        Self::build(lattice, LoopKind::Direct, bonds)
    }

    pub fn dual(lattice: &TorusLattice, bonds: impl IntoIterator<Item = BondId>) -> Result<Self> {
        Self::build(lattice, LoopKind::Dual, bonds)
    }

    /// Builds a loop from a bond set and infers orientation signs by walking
    /// each cycle. Cycles touching a vertex (or face) more than twice keep
    /// `+1` signs, which is only meaningful for modulus 2.
    pub fn build(
        lattice: &TorusLattice,
        kind: LoopKind,
        bonds: impl IntoIterator<Item = BondId>,
    ) -> Result<Self> {
        let mut list: Vec<BondId> = bonds.into_iter().collect();
        for &b in &list {
            lattice.check_bond(b)?;
        }
        list.sort_unstable();
        let n = list.len();
        list.dedup();
        if list.len() != n {
            return Err(Error::InvalidLoop("duplicate bond ids".into()));
        }
        let signs = orient(lattice, kind, &list);
        Ok(Self {
            kind,
            bonds: list,
            signs,
        })
    }

    pub fn kind(&self) -> LoopKind {
        self.kind
    }

    /// Bond ids in ascending order.
    pub fn bonds(&self) -> &[BondId] {
        &self.bonds
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn signed_bonds(&self) -> impl Iterator<Item = (BondId, i8)> + '_ {
        self.bonds.iter().copied().zip(self.signs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn contains(&self, bond: BondId) -> bool {
        self.bonds.binary_search(&bond).is_ok()
    }

    pub fn sign_of(&self, bond: BondId) -> Option<i8> {
        self.bonds.binary_search(&bond).ok().map(|i| self.signs[i])
    }

    pub fn shared_bonds(&self, other: &Loop) -> Vec<BondId> {
        self.bonds
            .iter()
            .copied()
            .filter(|b| other.contains(*b))
            .collect()
    }

    /// Symmetric difference with a bond set, re-oriented.
    pub fn symmetric_difference(
        &self,
        lattice: &TorusLattice,
        other: impl IntoIterator<Item = BondId>,
    ) -> Result<Self> {
        let mut set: BTreeSet<BondId> = self.bonds.iter().copied().collect();
        for b in other {
            if !set.remove(&b) {
                set.insert(b);
            }
        }
        Self::build(lattice, self.kind, set)
    }
}

/// Orientation signs by cycle traversal. Each component is normalised so the
/// first nonzero winding number is positive.
fn orient(lattice: &TorusLattice, kind: LoopKind, bonds: &[BondId]) -> Vec<i8> {
    let ends = |b: BondId| match kind {
        LoopKind::Direct => lattice.endpoints(b),
        LoopKind::Dual => lattice.sides(b),
    };
    // Sign of traversing bond b from its first end to its second.
    let forward = |b: BondId| -> i8 {
        match (kind, lattice.bond(b).expect("checked").orientation) {
            (LoopKind::Dual, Orientation::Horizontal) => -1,
            _ => 1,
        }
    };
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); lattice.lx * lattice.ly];
    for (i, &b) in bonds.iter().enumerate() {
        let (a, c) = ends(b);
        incident[a].push(i);
        incident[c].push(i);
    }
    let mut signs = vec![1i8; bonds.len()];
    if incident.iter().any(|l| !l.is_empty() && l.len() != 2) {
        return signs;
    }
    let mut visited = vec![false; bonds.len()];
    for start in 0..bonds.len() {
        if visited[start] {
            continue;
        }
        let mut component = Vec::new();
        let mut current = start;
        let (_, mut at) = ends(bonds[start]);
        signs[start] = forward(bonds[start]);
        visited[start] = true;
        component.push(start);
        loop {
            let next = incident[at]
                .iter()
                .copied()
                .find(|&i| i != current && !visited[i]);
            let Some(next) = next else { break };
            let (a, c) = ends(bonds[next]);
            if a == at {
                signs[next] = forward(bonds[next]);
                at = c;
            } else {
                signs[next] = -forward(bonds[next]);
                at = a;
            }
            visited[next] = true;
            component.push(next);
            current = next;
        }
        let (wx, wy) = lattice.winding(component.iter().map(|&i| (bonds[i], signs[i])), kind);
        let flip = match kind {
            LoopKind::Direct => wy < 0 || (wy == 0 && wx < 0),
            LoopKind::Dual => wx < 0 || (wx == 0 && wy < 0),
        };
        if flip {
            for &i in &component {
                signs[i] = -signs[i];
            }
        }
    }
    signs
}

/// Which generator of the torus the teams wind around.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameDirection {
    /// Teams on vertical loops, dual loop horizontal.
    Vertical,
    /// Teams on horizontal loops, dual loop vertical (the reflected game).
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopRole {
    Team(usize),
    Dual,
}

impl fmt::Display for LoopRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopRole::Team(i) => write!(f, "team {i}"),
            LoopRole::Dual => write!(f, "dual loop"),
        }
    }
}

/// One broken instance invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ModulusTooSmall(u32),
    TooFewTeams(usize),
    WrongKind(LoopRole),
    NotClosed(LoopRole),
    TeamsNotDisjoint { first: usize, second: usize, shared: Vec<BondId> },
    IntersectionCount { team: usize, count: usize },
    TeamHomology { team: usize, class: (i64, i64) },
    DualHomology { class: (i64, i64) },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ModulusTooSmall(m) => write!(f, "modulus {m} < 2"),
            Violation::TooFewTeams(t) => write!(f, "{t} teams, at least 2 required"),
            Violation::WrongKind(role) => write!(f, "{role} has the wrong loop kind"),
            Violation::NotClosed(role) => write!(f, "{role} is not closed"),
            Violation::TeamsNotDisjoint {
                first,
                second,
                shared,
            } => write!(
                f,
                "teams not disjoint: teams {first} and {second} share bonds {shared:?}"
            ),
            Violation::IntersectionCount { team, count } => write!(
                f,
                "intersection count ≠ 1: team {team} meets the dual loop in {count} bonds"
            ),
            Violation::TeamHomology { team, class } => {
                write!(f, "team {team} has homology class {class:?}")
            }
            Violation::DualHomology { class } => {
                write!(f, "dual loop has homology class {class:?}")
            }
        }
    }
}

/// One playable configuration: teams on direct loops and a single dual loop.
#[derive(Clone, Debug, PartialEq)]
pub struct GameInstance {
    lattice: TorusLattice,
    modulus: u32,
    teams: Vec<Loop>,
    dual_loop: Loop,
}

impl GameInstance {
    /// Builds an instance without validating it.
    pub fn new(lattice: TorusLattice, modulus: u32, teams: Vec<Loop>, dual_loop: Loop) -> Self {
        Self {
            lattice,
            modulus,
            teams,
            dual_loop,
        }
    }

    /// Builds and validates.
    pub fn checked(
        lattice: TorusLattice,
        modulus: u32,
        teams: Vec<Loop>,
        dual_loop: Loop,
    ) -> Result<Self> {
        let inst = Self::new(lattice, modulus, teams, dual_loop);
        inst.validate().map_err(Error::InvalidInstance)?;
        Ok(inst)
    }

    /// Straight column teams with a straight row dual loop.
    pub fn straight(
        lattice: TorusLattice,
        modulus: u32,
        columns: &[usize],
        dual_row: usize,
    ) -> Result<Self> {
        let teams = columns
            .iter()
            .map(|&x| lattice.column_loop(x))
            .collect::<Result<Vec<_>>>()?;
        let dual = lattice.row_dual_loop(dual_row)?;
        Self::checked(lattice, modulus, teams, dual)
    }

    /// Reflected game: straight row teams with a straight column dual loop.
    pub fn straight_horizontal(
        lattice: TorusLattice,
        modulus: u32,
        rows: &[usize],
        dual_column: usize,
    ) -> Result<Self> {
        let teams = rows
            .iter()
            .map(|&y| lattice.row_loop(y))
            .collect::<Result<Vec<_>>>()?;
        let dual = lattice.column_dual_loop(dual_column)?;
        Self::checked(lattice, modulus, teams, dual)
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn teams(&self) -> &[Loop] {
        &self.teams
    }

    pub fn dual_loop(&self) -> &Loop {
        &self.dual_loop
    }

    pub fn num_teams(&self) -> usize {
        self.teams.len()
    }

    /// Three or more teams make the game nonlocal.
    pub fn is_nonlocal(&self) -> bool {
        self.teams.len() >= 3
    }

    /// The bond `t_i` where team `i` meets the dual loop, when unique.
    pub fn intersection(&self, team: usize) -> Option<BondId> {
        let shared = self.teams.get(team)?.shared_bonds(&self.dual_loop);
        (shared.len() == 1).then(|| shared[0])
    }

    /// All intersection bonds; panics on an invalid instance.
    pub fn intersections(&self) -> Vec<BondId> {
        (0..self.teams.len())
            .map(|i| {
                self.intersection(i)
                    .expect("intersections requested on an invalid instance")
            })
            .collect()
    }

    pub fn direction(&self) -> Option<GameDirection> {
        let class = self.lattice.homology_class(&self.dual_loop).ok()?;
        let m = self.modulus.max(2) as i64;
        let unit = |w: i64| matches!(w.rem_euclid(m), r if r == 1 || r == m - 1);
        let zero = |w: i64| w.rem_euclid(m) == 0;
        if unit(class.0) && zero(class.1) {
            Some(GameDirection::Vertical)
        } else if zero(class.0) && unit(class.1) {
            Some(GameDirection::Horizontal)
        } else {
            None
        }
    }

    /// Every violated invariant, or `Ok` for a playable instance.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.modulus < 2 {
            out.push(Violation::ModulusTooSmall(self.modulus));
        }
        if self.teams.len() < 2 {
            out.push(Violation::TooFewTeams(self.teams.len()));
        }
        let m = self.modulus.max(2) as i64;
        let unit = |w: i64| matches!(w.rem_euclid(m), r if r == 1 || r == m - 1);
        let zero = |w: i64| w.rem_euclid(m) == 0;

        if self.dual_loop.kind != LoopKind::Dual {
            out.push(Violation::WrongKind(LoopRole::Dual));
        }
        let direction = match self.lattice.homology_class(&self.dual_loop) {
            Ok(class) => {
                let d = self.direction();
                if d.is_none() {
                    out.push(Violation::DualHomology { class });
                }
                d.unwrap_or(GameDirection::Vertical)
            }
            Err(_) => {
                out.push(Violation::NotClosed(LoopRole::Dual));
                GameDirection::Vertical
            }
        };

        for (i, team) in self.teams.iter().enumerate() {
            if team.kind != LoopKind::Direct {
                out.push(Violation::WrongKind(LoopRole::Team(i)));
            }
            match self.lattice.homology_class(team) {
                Ok(class) => {
                    let ok = match direction {
                        GameDirection::Vertical => zero(class.0) && unit(class.1),
                        GameDirection::Horizontal => unit(class.0) && zero(class.1),
                    };
                    if !ok {
                        out.push(Violation::TeamHomology { team: i, class });
                    }
                }
                Err(_) => out.push(Violation::NotClosed(LoopRole::Team(i))),
            }
            let count = team.shared_bonds(&self.dual_loop).len();
            if count != 1 {
                out.push(Violation::IntersectionCount { team: i, count });
            }
        }
        for i in 0..self.teams.len() {
            for j in i + 1..self.teams.len() {
                let shared = self.teams[i].shared_bonds(&self.teams[j]);
                if !shared.is_empty() {
                    out.push(Violation::TeamsNotDisjoint {
                        first: i,
                        second: j,
                        shared,
                    });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            lx: self.lattice.lx,
            ly: self.lattice.ly,
            modulus: self.modulus,
            teams: self.teams.iter().map(|t| t.bonds.clone()).collect(),
            dual_loop: self.dual_loop.bonds.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("instance spec serializes")
    }

    /// Parses the instance JSON schema and validates the result.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfiguration(format!("instance JSON: {e}")))?;
        spec.build()
    }

    fn key(&self) -> (Vec<Vec<BondId>>, Vec<BondId>) {
        (
            self.teams.iter().map(|t| t.bonds.clone()).collect(),
            self.dual_loop.bonds.clone(),
        )
    }
}

/// Instance file schema:
/// `{"lx":int,"ly":int,"M":int,"teams":[[bond_id,...],...],"dual_loop":[bond_id,...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub lx: usize,
    pub ly: usize,
    #[serde(rename = "M")]
    pub modulus: u32,
    pub teams: Vec<Vec<BondId>>,
    pub dual_loop: Vec<BondId>,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<GameInstance> {
        let lattice = TorusLattice::new(self.lx, self.ly)?;
        let teams = self
            .teams
            .iter()
            .map(|t| Loop::direct(&lattice, t.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        let dual = Loop::dual(&lattice, self.dual_loop.iter().copied())?;
        GameInstance::checked(lattice, self.modulus, teams, dual)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerateOptions {
    pub modulus: u32,
    /// Add single-star dual deformations and single-plaquette team deformations.
    pub deformations: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            modulus: 2,
            deformations: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceShape {
    Straight,
    /// Dual loop moved across the star at vertex `(x, y)`.
    DualDeformed { x: usize, y: usize },
    /// Team `team` moved across the plaquette at face `(x, y)`.
    TeamDeformed { team: usize, x: usize, y: usize },
}

/// Straight instances for every `teams`-subset of columns and every dual row,
/// plus elementary deformations when requested. Only valid instances are
/// emitted and duplicates are dropped.
pub fn enumerate_instances(
    lattice: &TorusLattice,
    teams: usize,
    options: &EnumerateOptions,
) -> Result<Vec<GameInstance>> {
    Ok(enumerate_tagged(lattice, teams, options)?
        .into_iter()
        .map(|(_, i)| i)
        .collect())
}

pub fn enumerate_tagged(
    lattice: &TorusLattice,
    teams: usize,
    options: &EnumerateOptions,
) -> Result<Vec<(InstanceShape, GameInstance)>> {
    if teams > lattice.lx {
        return Err(Error::NotEnoughColumns {
            teams,
            columns: lattice.lx,
        });
    }
    if teams < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "{teams} teams: an instance needs at least 2"
        )));
    }
    if options.modulus < 2 {
        return Err(Error::InvalidModulus(options.modulus));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |shape: InstanceShape, inst: GameInstance, out: &mut Vec<_>| {
        if inst.validate().is_ok() && seen.insert(inst.key()) {
            out.push((shape, inst));
        }
    };
    for columns in combinations(lattice.lx, teams) {
        for row in 0..lattice.ly {
            let base = GameInstance::straight(*lattice, options.modulus, &columns, row)?;
            push(InstanceShape::Straight, base.clone(), &mut out);
            if !options.deformations {
                continue;
            }
            for vy in [row, (row + 1) % lattice.ly] {
                for vx in 0..lattice.lx {
                    let star = lattice.star_bonds(vx, vy)?;
                    let dual = base.dual_loop.symmetric_difference(lattice, star)?;
                    let inst =
                        GameInstance::new(*lattice, options.modulus, base.teams.clone(), dual);
                    push(InstanceShape::DualDeformed { x: vx, y: vy }, inst, &mut out);
                }
            }
            for (t, &cx) in columns.iter().enumerate() {
                for fx in [(cx + lattice.lx - 1) % lattice.lx, cx] {
                    for fy in 0..lattice.ly {
                        let plaq = lattice.plaquette_bonds(fx, fy)?;
                        let mut team_loops = base.teams.clone();
                        team_loops[t] = team_loops[t].symmetric_difference(lattice, plaq)?;
                        let inst = GameInstance::new(
                            *lattice,
                            options.modulus,
                            team_loops,
                            base.dual_loop.clone(),
                        );
                        push(
                            InstanceShape::TeamDeformed {
                                team: t,
                                x: fx,
                                y: fy,
                            },
                            inst,
                            &mut out,
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A list of instances over several team counts, with a tally by shape.
#[derive(Clone, Debug)]
pub struct InstanceFamily {
    pub instances: Vec<GameInstance>,
    pub description: FamilyDescription,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDescription {
    pub lx: usize,
    pub ly: usize,
    pub team_counts: Vec<usize>,
    pub deformations: bool,
    pub straight: usize,
    pub dual_deformed: usize,
    pub team_deformed: usize,
}

pub fn instance_family(
    lattice: &TorusLattice,
    team_counts: &[usize],
    options: &EnumerateOptions,
) -> Result<InstanceFamily> {
    let mut instances = Vec::new();
    let mut description = FamilyDescription {
        lx: lattice.lx,
        ly: lattice.ly,
        team_counts: team_counts.to_vec(),
        deformations: options.deformations,
        straight: 0,
        dual_deformed: 0,
        team_deformed: 0,
    };
    for &t in team_counts {
        for (shape, inst) in enumerate_tagged(lattice, t, options)? {
            match shape {
                InstanceShape::Straight => description.straight += 1,
                InstanceShape::DualDeformed { .. } => description.dual_deformed += 1,
                InstanceShape::TeamDeformed { .. } => description.team_deformed += 1,
            }
            instances.push(inst);
        }
    }
    Ok(InstanceFamily {
        instances,
        description,
    })
}

/// k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            break;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}
