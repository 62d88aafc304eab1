//! Lattice geometry: sites of ℤ^d, torus wrapping and the canonical site order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// An element of ℤ^d, used both for sites and for shift vectors.
///
/// Unused trailing coordinates are kept at zero, so the derived ordering is
/// the lexicographic order on the first `dim` coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Site {
    /// Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "site dimension must be 1..=3"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(&[0; MAX_DIM][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim()]
    }

    pub fn coord(&self, i: usize) -> i64 {
        self.coords[i]
    }

    /// L1 norm.
    pub fn l1(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }
}

/// Componentwise sum without wrapping.
impl std::ops::Add for Site {
    type Output = Site;
    fn add(self, v: Site) -> Site {
        debug_assert_eq!(self.dim, v.dim);
        let mut out = self;
        for i in 0..MAX_DIM {
            out.coords[i] += v.coords[i];
        }
        out
    }
}

/// Componentwise difference without wrapping.
impl std::ops::Sub for Site {
    type Output = Site;
    fn sub(self, v: Site) -> Site {
        self + -v
    }
}

impl std::ops::Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        let mut out = self;
        for c in out.coords.iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `(1,2)`, `1,2` or `3`.
impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix('(').unwrap_or(t);
        let t = t.strip_suffix(')').unwrap_or(t);
        let coords = t
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("bad coordinate {c:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !(1..=MAX_DIM).contains(&coords.len()) {
            return Err(Error::InvalidDimension(coords.len()));
        }
        Ok(Site::new(&coords))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LatticeMode {
    Torus(Vec<i64>),
    Unbounded,
}

/// ℤ^d itself or a finite torus proxy of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    dim: usize,
    mode: LatticeMode,
}

impl Lattice {
    pub fn torus(sides: &[i64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&sides.len()) {
            return Err(Error::InvalidDimension(sides.len()));
        }
        if sides.iter().any(|&l| l < 2) {
            return Err(Error::TorusSideTooSmall(sides.to_vec()));
        }
        Ok(Lattice {
            dim: sides.len(),
            mode: LatticeMode::Torus(sides.to_vec()),
        })
    }

    pub fn unbounded(dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Lattice {
            dim,
            mode: LatticeMode::Unbounded,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> &LatticeMode {
        &self.mode
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.mode, LatticeMode::Torus(_))
    }

    pub fn sides(&self) -> Option<&[i64]> {
        match &self.mode {
            LatticeMode::Torus(l) => Some(l),
            LatticeMode::Unbounded => None,
        }
    }

    /// Number of sites of a torus; `None` on ℤ^d.
    pub fn num_sites(&self) -> Option<usize> {
        self.sides().map(|l| l.iter().product::<i64>() as usize)
    }

    pub fn check_site(&self, x: Site) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(x, x.dim(), self.dim));
        }
        Ok(())
    }

    /// Reduces `x` into the fundamental domain; identity on ℤ^d.
    pub fn wrap(&self, x: Site) -> Site {
        match &self.mode {
            LatticeMode::Unbounded => x,
            LatticeMode::Torus(sides) => {
                let mut out = x;
                for (c, &l) in out.coords.iter_mut().zip(sides) {
                    *c = c.rem_euclid(l);
                }
                out
            }
        }
    }

    /// `x + v`, wrapped componentwise on a torus.
    pub fn shift(&self, x: Site, v: Site) -> Site {
        self.wrap(x + v)
    }

    /// Position of a (wrapped) torus site in the canonical lexicographic order.
    pub fn index_of(&self, x: Site) -> usize {
        let sides = self.sides().expect("index_of requires a torus");
        let x = self.wrap(x);
        let mut idx = 0i64;
        for (i, &l) in sides.iter().enumerate() {
            idx = idx * l + x.coords[i];
        }
        idx as usize
    }

    /// Inverse of [`Lattice::index_of`].
    pub fn site_at(&self, mut idx: usize) -> Site {
        let sides = self.sides().expect("site_at requires a torus");
        let mut c = [0i64; MAX_DIM];
        for i in (0..sides.len()).rev() {
            let l = sides[i] as usize;
            c[i] = (idx % l) as i64;
            idx /= l;
        }
        Site::new(&c[..sides.len()])
    }

    /// All torus sites in the canonical (lexicographic) order.
    pub fn sites(&self) -> Result<Vec<Site>> {
        let n = self.num_sites().ok_or(Error::UnboundedLattice)?;
        Ok((0..n).map(|i| self.site_at(i)).collect())
    }
}
