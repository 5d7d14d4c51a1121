//! Frames and the unitary relabelings between them.
//!
//! * `primitive_psi`: the realizable variables, spinor ψ.
//! * `transformed`: `L_z → (−1)^n L_z` on links with odd origin (with `L_±`
//!   swapped there), giving the standard cQED signs.
//! * `primitive_chi`: the alternative realization with spinor
//!   `χ_n = σ_x^(n1+n2) ψ_n`, i.e. `C ↔ D` swapped on odd vertices.
//!
//! Both maps are signed permutations of the product basis, so operators and
//! states are transported exactly.

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind, Layout};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeGeometry};
use crate::operators::SparseOperator;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    PrimitivePsi,
    #[default]
    Transformed,
    PrimitiveChi,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::PrimitivePsi => "primitive_psi",
            Frame::Transformed => "transformed",
            Frame::PrimitiveChi => "primitive_chi",
        }
    }

    pub fn is_primitive(self) -> bool {
        !matches!(self, Frame::Transformed)
    }

    pub const ALL: [Frame; 3] = [Frame::PrimitivePsi, Frame::Transformed, Frame::PrimitiveChi];
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `m → −m` on every link whose origin is odd.
fn sign_change(geometry: &LatticeGeometry, layout: &Layout, code: u64) -> u64 {
    let mut out = code;
    for li in 0..layout.n_links {
        if geometry.link_parity(li) < 0 {
            out = layout.with_m(out, li, -layout.m(code, li));
        }
    }
    out
}

/// `C ↔ D` on odd vertices; a doubly occupied vertex picks up `−1` from
/// reordering the two creation operators.
fn species_swap(geometry: &LatticeGeometry, code: u64) -> (u64, f64) {
    let mut out = code;
    let mut sign = 1.0;
    for (vi, v) in geometry.vertices.iter().enumerate() {
        if v.is_even() {
            continue;
        }
        let c = code >> (2 * vi) & 1;
        let d = code >> (2 * vi + 1) & 1;
        if c == 1 && d == 1 {
            sign = -sign;
        }
        out = (out & !(0b11 << (2 * vi))) | (d << (2 * vi)) | (c << (2 * vi + 1));
    }
    (out, sign)
}

fn check_pair(geometry: &LatticeGeometry, from: Frame, to: Frame) -> Result<()> {
    let err = |reason: &str| Error::UnsupportedFramePair {
        from: from.name().into(),
        to: to.name().into(),
        reason: reason.into(),
    };
    if from == to {
        return Err(err("frames are identical"));
    }
    let involves_sign_change = from == Frame::Transformed || to == Frame::Transformed;
    let involves_swap = from == Frame::PrimitiveChi || to == Frame::PrimitiveChi;
    if (involves_sign_change || involves_swap)
        && geometry.spec.boundary == Boundary::Periodic
        && !geometry.is_bipartite()
    {
        return Err(err("periodic lattice with odd extent has no consistent staggering"));
    }
    Ok(())
}

/// Image of a packed state under the frame change, with its sign.
pub fn map_code(
    geometry: &LatticeGeometry,
    layout: &Layout,
    code: u64,
    from: Frame,
    to: Frame,
) -> (u64, f64) {
    // route through primitive_psi
    let (psi, s1) = match from {
        Frame::PrimitivePsi => (code, 1.0),
        Frame::Transformed => (sign_change(geometry, layout, code), 1.0),
        Frame::PrimitiveChi => species_swap(geometry, code),
    };
    match to {
        Frame::PrimitivePsi => (psi, s1),
        Frame::Transformed => (sign_change(geometry, layout, psi), s1),
        Frame::PrimitiveChi => {
            let (c, s2) = species_swap(geometry, psi);
            (c, s1 * s2)
        }
    }
}

/// Image of a basis. Gauss sectors keep their targets: the generators map
/// onto each other.
pub fn frame_map_basis(basis: &Basis, from: Frame, to: Frame) -> Result<Basis> {
    check_pair(basis.geometry(), from, to)?;
    let g = basis.geometry();
    let layout = basis.layout();
    let codes = basis
        .codes()
        .iter()
        .map(|c| map_code(g, layout, *c, from, to).0)
        .collect();
    let kind = match basis.kind() {
        BasisKind::Sector { frame, target_g } if *frame == from => BasisKind::Sector {
            frame: to,
            target_g: target_g.clone(),
        },
        other => other.clone(),
    };
    Basis::from_codes(basis.geometry_arc(), basis.l(), kind, codes)
}

/// `U O U†` expressed on the mapped basis.
pub fn frame_map_operator(
    op: &SparseOperator,
    basis: &Basis,
    from: Frame,
    to: Frame,
) -> Result<(SparseOperator, Basis)> {
    op.check_basis(basis)?;
    let target = frame_map_basis(basis, from, to)?;
    let g = basis.geometry();
    let layout = basis.layout();
    let images: Vec<(usize, f64)> = basis
        .codes()
        .iter()
        .map(|c| {
            let (img, s) = map_code(g, layout, *c, from, to);
            (target.index_of(img).expect("image in mapped basis"), s)
        })
        .collect();
    let triplets = op
        .triplets()
        .map(|(r, c, v)| {
            let (ri, rs) = images[r];
            let (ci, cs) = images[c];
            (ri, ci, v * (rs * cs))
        })
        .collect();
    let mapped = SparseOperator::from_triplets(target.len(), target.tag(), triplets);
    Ok((mapped, target))
}

/// `U |ψ⟩` expressed on the mapped basis.
pub fn frame_map_state(
    amplitudes: &[Complex64],
    basis: &Basis,
    from: Frame,
    to: Frame,
) -> Result<(Vec<Complex64>, Basis)> {
    let target = frame_map_basis(basis, from, to)?;
    let g = basis.geometry();
    let layout = basis.layout();
    let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
    for (i, c) in basis.codes().iter().enumerate() {
        let (img, s) = map_code(g, layout, *c, from, to);
        out[target.index_of(img).expect("image in mapped basis")] = amplitudes[i] * s;
    }
    Ok((out, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_full_basis;
    use crate::lattice::{build_lattice, LatticeSpec};
    use std::sync::Arc;

    #[test]
    fn even_links_untouched_odd_links_flipped() {
        let g = build_lattice(LatticeSpec::open(3, 1)).unwrap();
        let layout = Layout::new(&g, 1).unwrap();
        let code = layout.with_m(layout.with_m(0, 0, 1), 1, 1);
        let (img, s) = map_code(&g, &layout, code, Frame::PrimitivePsi, Frame::Transformed);
        assert_eq!(s, 1.0);
        assert_eq!(layout.m(img, 0), 1);
        assert_eq!(layout.m(img, 1), -1);
    }

    #[test]
    fn maps_are_involutions_and_compose() {
        let g = Arc::new(build_lattice(LatticeSpec::open(2, 2)).unwrap());
        let b = enumerate_full_basis(Arc::clone(&g), 1).unwrap();
        let layout = b.layout();
        for &c in b.codes().iter().step_by(7) {
            for from in Frame::ALL {
                for to in Frame::ALL {
                    if from == to {
                        continue;
                    }
                    let (x, s1) = map_code(&g, layout, c, from, to);
                    let (y, s2) = map_code(&g, layout, x, to, from);
                    assert_eq!((y, s1 * s2), (c, 1.0));
                }
            }
        }
    }

    #[test]
    fn odd_periodic_rejected() {
        let g = Arc::new(build_lattice(LatticeSpec::periodic(3, 2)).unwrap());
        let b = enumerate_full_basis(g, 0).unwrap();
        assert!(frame_map_basis(&b, Frame::PrimitivePsi, Frame::Transformed).is_err());
        assert!(frame_map_basis(&b, Frame::Transformed, Frame::Transformed).is_err());
    }
}
