//! Object-index grids, the embedding table, and the rotation/reflection
//! geometry shared by the symmetric heads.
//!
//! Grid transforms are fixed project-wide:
//!
//! * `rotate90`: `out(i, j) = in(j, x - 1 - i)`, a counter-clockwise quarter
//!   turn. Content to the right of the centre ends up above it, so the
//!   quadrant for action `d` lands on the quadrant for action `d + 1`.
//! * `reflect`: `out(i, j) = in(x - 1 - i, j)`, a flip about the centre row.

use std::fmt;

use crate::error::{Error, Result};
use crate::gridworld::{render_object_grid, Action, GameInstance, Position, GRID_SIZE};

/// Side of the ego-centric grid: large enough to show the whole board with
/// the agent in any interior cell.
pub const EGO_SIZE: usize = 2 * GRID_SIZE - 3;

/// Embedding dimension per object.
pub const EMBED_DIM: usize = 2;

/// Number of distinct objects, padding included.
pub const NUM_OBJECTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Object {
    Space = 0,
    Wall = 1,
    Agent = 2,
    Goal = 3,
    /// Padding outside the board in ego-centric grids.
    Void = 4,
}

impl Object {
    pub const ALL: [Object; NUM_OBJECTS] =
        [Object::Space, Object::Wall, Object::Agent, Object::Goal, Object::Void];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Option<Object> {
        Self::ALL.get(index as usize).copied()
    }

    pub fn glyph(self) -> char {
        match self {
            Object::Space => '.',
            Object::Wall => 'X',
            Object::Agent => '@',
            Object::Goal => '*',
            Object::Void => ' ',
        }
    }
}

/// Which grid the models see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Absolute,
    Egocentric,
}

impl Representation {
    pub const fn side(self) -> usize {
        match self {
            Representation::Absolute => GRID_SIZE,
            Representation::Egocentric => EGO_SIZE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Absolute => "absolute",
            Representation::Egocentric => "egocentric",
        }
    }

    pub fn encode(self, instance: &GameInstance, agent: Position) -> Result<ObjectGrid> {
        match self {
            Representation::Absolute => encode_absolute(instance, agent),
            Representation::Egocentric => encode_egocentric(instance, agent),
        }
    }

    /// Encode into an existing grid of the right side, reusing its buffer.
    pub fn encode_into(self, instance: &GameInstance, agent: Position, grid: &mut ObjectGrid) {
        debug_assert!(agent.is_interior());
        let side = self.side();
        grid.side = side;
        grid.cells.clear();
        let (fill, dr, dc) = match self {
            Representation::Absolute => (Object::Space, 0, 0),
            Representation::Egocentric => {
                let centre = (EGO_SIZE - 1) / 2;
                (Object::Void, centre - agent.row, centre - agent.col)
            }
        };
        grid.cells.resize(side * side, fill as u8);
        for r in 0..GRID_SIZE {
            for c in 0..GRID_SIZE {
                let p = Position::new(r, c);
                let obj = if p == agent {
                    Object::Agent
                } else if p.is_wall() {
                    Object::Wall
                } else if p == instance.goal() {
                    Object::Goal
                } else {
                    Object::Space
                };
                grid.cells[(r + dr) * side + c + dc] = obj as u8;
            }
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Square grid of object indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectGrid {
    side: usize,
    cells: Vec<u8>,
}

impl ObjectGrid {
    pub fn filled(side: usize, object: Object) -> Self {
        Self { side, cells: vec![object as u8; side * side] }
    }

    /// Build from raw indices. Fails if the length is not a square of `side`
    /// or an index is outside the object vocabulary.
    pub fn from_cells(side: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != side * side {
            return Err(Error::ShapeMismatch { expected: side * side, got: cells.len() });
        }
        if cells.iter().any(|&c| c as usize >= NUM_OBJECTS) {
            return Err(Error::Config("object index out of range".into()));
        }
        Ok(Self { side, cells })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Object {
        Object::ALL[self.cells[row * self.side + col] as usize]
    }

    pub fn set(&mut self, row: usize, col: usize, object: Object) {
        self.cells[row * self.side + col] = object as u8;
    }

    pub fn count(&self, object: Object) -> usize {
        self.cells.iter().filter(|&&c| c == object as u8).count()
    }

    pub fn find(&self, object: Object) -> Option<(usize, usize)> {
        self.cells
            .iter()
            .position(|&c| c == object as u8)
            .map(|k| (k / self.side, k % self.side))
    }

    pub fn rotate90(&self) -> Self {
        Self { side: self.side, cells: rotate_cells(&self.cells, self.side) }
    }

    pub fn reflect(&self) -> Self {
        Self { side: self.side, cells: reflect_cells(&self.cells, self.side) }
    }
}

impl fmt::Display for ObjectGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.side {
            for c in 0..self.side {
                write!(f, "{}", self.get(r, c).glyph())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn encode_absolute(instance: &GameInstance, agent: Position) -> Result<ObjectGrid> {
    render_object_grid(instance, agent)
}

/// Board re-centred on the agent: original `(r, c)` lands on
/// `(r + 5 - agent.row, c + 5 - agent.col)`, everything else is void.
pub fn encode_egocentric(instance: &GameInstance, agent: Position) -> Result<ObjectGrid> {
    if !agent.is_interior() {
        return Err(Error::NotInterior { row: agent.row, col: agent.col });
    }
    let mut grid = ObjectGrid::filled(EGO_SIZE, Object::Void);
    Representation::Egocentric.encode_into(instance, agent, &mut grid);
    Ok(grid)
}

/// Counter-clockwise quarter turn of a square row-major buffer.
pub fn rotate_cells<T: Copy>(cells: &[T], side: usize) -> Vec<T> {
    assert_eq!(cells.len(), side * side, "rotate_cells needs a square buffer");
    let mut out = Vec::with_capacity(cells.len());
    for i in 0..side {
        for j in 0..side {
            out.push(cells[j * side + (side - 1 - i)]);
        }
    }
    out
}

/// Flip of a square row-major buffer about its centre row.
pub fn reflect_cells<T: Copy>(cells: &[T], side: usize) -> Vec<T> {
    assert_eq!(cells.len(), side * side, "reflect_cells needs a square buffer");
    let mut out = Vec::with_capacity(cells.len());
    for i in 0..side {
        out.extend_from_slice(&cells[(side - 1 - i) * side..(side - i) * side]);
    }
    out
}

/// Where cell `(row, col)` ends up after one `rotate90`.
pub fn rotated_position(row: usize, col: usize, side: usize) -> (usize, usize) {
    (side - 1 - col, row)
}

/// Number of distinct embedding rows. Void cells read the space row, so
/// off-board padding looks exactly like empty floor to the model.
pub const EMBED_ROWS: usize = 4;

/// Embedding row used by an object index.
#[inline]
pub(crate) fn embed_slot(index: u8) -> usize {
    if index == Object::Void as u8 {
        Object::Space as usize
    } else {
        index as usize
    }
}

/// Trainable 2-vectors for space, wall, agent and goal.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vectors: [f64; EMBED_ROWS * EMBED_DIM],
}

impl Default for EmbeddingTable {
    /// Space at the origin; agent, wall and goal on three corners of the
    /// `(+/-0.1, 0), (0, +/-0.1)` diamond.
    fn default() -> Self {
        let mut t = Self::zeros();
        t.set(Object::Agent, [0.1, 0.0]);
        t.set(Object::Wall, [-0.1, 0.0]);
        t.set(Object::Goal, [0.0, 0.1]);
        t
    }
}

impl EmbeddingTable {
    pub const LEN: usize = EMBED_ROWS * EMBED_DIM;

    pub fn zeros() -> Self {
        Self { vectors: [0.0; Self::LEN] }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let vectors = values
            .try_into()
            .map_err(|_| Error::ShapeMismatch { expected: Self::LEN, got: values.len() })?;
        Ok(Self { vectors })
    }

    pub fn get(&self, object: Object) -> [f64; EMBED_DIM] {
        let r = self.row(object as u8);
        [r[0], r[1]]
    }

    /// Setting `Void` writes the shared space row.
    pub fn set(&mut self, object: Object, value: [f64; EMBED_DIM]) {
        let k = embed_slot(object as u8) * EMBED_DIM;
        self.vectors[k..k + EMBED_DIM].copy_from_slice(&value);
    }

    #[inline]
    pub(crate) fn row(&self, index: u8) -> &[f64] {
        let k = embed_slot(index) * EMBED_DIM;
        &self.vectors[k..k + EMBED_DIM]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.vectors
    }
}

fn check_mask_side(x: usize) -> Result<usize> {
    if x < 3 || x.is_multiple_of(2) {
        return Err(Error::InvalidMaskSize(x));
    }
    Ok((x - 1) / 2)
}

/// The triangular wedge of the ego grid facing one move direction, centre
/// and both bounding diagonals included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadrantMask {
    pub direction: Action,
    pub side: usize,
    /// Sorted `(row, col)` offsets.
    pub cells: Vec<(usize, usize)>,
}

impl QuadrantMask {
    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

/// Wedge for `direction` on an `x` by `x` grid. The right-facing wedge is
/// `{(i, j) : j - c >= |i - c|}`; the others are its quarter turns.
pub fn build_quadrant_mask(direction: Action, x: usize) -> Result<QuadrantMask> {
    let c = check_mask_side(x)? as isize;
    let turns = (direction.index() + 4 - Action::Right.index()) % 4;
    let mut cells = Vec::new();
    for i in 0..x {
        for j in 0..x {
            if j as isize - c >= (i as isize - c).abs() {
                let mut cell = (i, j);
                for _ in 0..turns {
                    cell = rotated_position(cell.0, cell.1, x);
                }
                cells.push(cell);
            }
        }
    }
    cells.sort_unstable();
    Ok(QuadrantMask { direction, side: x, cells })
}

/// Lower half of the right-facing wedge: the centre row rightward and
/// everything between it and the lower diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OctantMask {
    pub side: usize,
    /// Sorted `(row, col)` offsets.
    pub cells: Vec<(usize, usize)>,
}

impl OctantMask {
    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

pub fn build_octant_mask(x: usize) -> Result<OctantMask> {
    let c = check_mask_side(x)?;
    let mut cells = Vec::new();
    for i in c..x {
        for j in i..x {
            cells.push((i, j));
        }
    }
    cells.sort_unstable();
    Ok(OctantMask { side: x, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn fig1() -> GameInstance {
        GameInstance::new(Position::new(4, 4), Position::new(1, 1)).unwrap()
    }

    #[test]
    fn absolute_matches_figure_one() {
        let g = encode_absolute(&fig1(), Position::new(4, 4)).unwrap();
        assert_eq!(g.cells().len(), 49);
        assert_eq!(g.get(1, 1), Object::Goal);
        assert_eq!(g.get(4, 4), Object::Agent);
        assert_eq!(g.get(0, 3), Object::Wall);
        assert_eq!(g.count(Object::Wall), 24);
        assert_eq!(g.count(Object::Void), 0);
    }

    #[test]
    fn egocentric_matches_figure_four() {
        let g = encode_egocentric(&fig1(), Position::new(4, 4)).unwrap();
        assert_eq!(g.side(), 11);
        assert_eq!(g.get(1, 1), Object::Wall);
        assert_eq!(g.get(2, 2), Object::Goal);
        assert_eq!(g.get(5, 5), Object::Agent);
        assert_eq!(g.get(0, 0), Object::Void);
        assert_eq!(g.get(7, 7), Object::Wall);
        assert_eq!(g.get(8, 8), Object::Void);
        assert_eq!(g.cells().len() - g.count(Object::Void), 49);
    }

    #[test]
    fn egocentric_corner_agent() {
        let i = GameInstance::new(Position::new(1, 1), Position::new(5, 5)).unwrap();
        let g = encode_egocentric(&i, Position::new(1, 1)).unwrap();
        assert_eq!(g.get(4, 4), Object::Wall);
        assert_eq!(g.get(9, 9), Object::Goal);
        assert_eq!(g.get(10, 10), Object::Wall);
        assert_eq!(g.get(5, 5), Object::Agent);
    }

    #[test]
    fn egocentric_is_shifted_absolute() {
        for inst in GameInstance::all() {
            for agent in Position::interior() {
                let abs = encode_absolute(&inst, agent).unwrap();
                let ego = encode_egocentric(&inst, agent).unwrap();
                for r in 0..EGO_SIZE {
                    for c in 0..EGO_SIZE {
                        let (ar, ac) = (r as isize + agent.row as isize - 5, c as isize + agent.col as isize - 5);
                        let expect = if (0..7).contains(&ar) && (0..7).contains(&ac) {
                            abs.get(ar as usize, ac as usize)
                        } else {
                            Object::Void
                        };
                        assert_eq!(ego.get(r, c), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn egocentric_round_trips() {
        for inst in GameInstance::all() {
            let ego = encode_egocentric(&inst, inst.start()).unwrap();
            assert_eq!(ego.find(Object::Agent), Some((5, 5)));
            let (wr, wc) = ego.find(Object::Wall).unwrap();
            // first wall in row-major order is the top-left corner of the board
            let (gr, gc) = ego.find(Object::Goal).unwrap();
            let goal = Position::new(gr - wr, gc - wc);
            let agent = Position::new(5 - wr, 5 - wc);
            assert_eq!(GameInstance::new(agent, goal).unwrap(), inst);
        }
    }

    #[test]
    fn rotation_and_reflection_are_permutations() {
        let cells: Vec<u32> = (0..121).collect();
        let mut r = cells.clone();
        for _ in 0..4 {
            r = rotate_cells(&r, 11);
        }
        assert_eq!(r, cells);
        assert_eq!(rotate_cells(&cells, 11)[60], 60);
        let f = reflect_cells(&cells, 11);
        assert_eq!(reflect_cells(&f, 11), cells);
        assert_eq!(&f[55..66], &cells[55..66]);
    }

    #[test]
    fn rotation_moves_right_to_up() {
        let mut g = ObjectGrid::filled(11, Object::Space);
        g.set(5, 8, Object::Goal);
        assert_eq!(g.rotate90().find(Object::Goal), Some((2, 5)));
    }

    fn set(cells: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
        cells.iter().copied().collect()
    }

    #[test]
    fn quadrant_sizes() {
        let q = build_quadrant_mask(Action::Right, 11).unwrap();
        assert_eq!(q.cells.len(), 36);
        for j in 5..11 {
            assert!(q.contains((5, j)));
        }
        assert!(q.contains((0, 10)) && q.contains((10, 10)) && q.contains((3, 7)));
        assert!(!q.contains((5, 4)) && !q.contains((3, 6)));
        let q3 = build_quadrant_mask(Action::Right, 3).unwrap();
        assert_eq!(set(&q3.cells), set(&[(1, 1), (1, 2), (0, 2), (2, 2)]));
        assert!(build_quadrant_mask(Action::Up, 4).is_err());
        assert!(build_quadrant_mask(Action::Up, 1).is_err());
    }

    #[test]
    fn quadrants_rotate_into_each_other() {
        for x in [3, 5, 11] {
            for d in Action::ALL {
                let q = build_quadrant_mask(d, x).unwrap();
                let next = build_quadrant_mask(Action::from_index((d.index() + 1) % 4).unwrap(), x).unwrap();
                let rotated: BTreeSet<_> = q.cells.iter().map(|&(r, c)| rotated_position(r, c, x)).collect();
                assert_eq!(rotated, set(&next.cells));
            }
        }
    }

    #[test]
    fn octant_sizes() {
        assert_eq!(build_octant_mask(11).unwrap().cells.len(), 21);
        assert_eq!(build_octant_mask(3).unwrap().cells.len(), 3);
        assert!(build_octant_mask(10).is_err());
    }

    #[test]
    fn default_embeddings() {
        let e = EmbeddingTable::default();
        assert_eq!(e.get(Object::Space), [0.0, 0.0]);
        assert_eq!(e.get(Object::Void), e.get(Object::Space));
        let corners: BTreeSet<_> = [Object::Wall, Object::Agent, Object::Goal]
            .iter()
            .map(|&o| {
                let v = e.get(o);
                ((v[0] * 10.0).round() as i32, (v[1] * 10.0).round() as i32)
            })
            .collect();
        assert_eq!(corners.len(), 3);
    }

    #[test]
    fn void_shares_the_space_row() {
        let mut e = EmbeddingTable::default();
        e.set(Object::Void, [0.3, -0.2]);
        assert_eq!(e.get(Object::Space), [0.3, -0.2]);
        assert_eq!(EmbeddingTable::LEN, 8);
    }
}
