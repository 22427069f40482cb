use std::collections::BTreeMap;
use std::f64::consts::PI;

use memfem_core::geometry::{frame, interpolate, mean_curvature_trace, Vec3};
use memfem_core::master_element::{eval_basis, ElementBasis};
use memfem_core::mesh::{
    enclosed_volume, make_sphere, make_sphere_octant, make_square_sheet, Element, ElementKind,
    Mesh, OctantSet,
};
use proptest::prelude::*;

/// Unit cube `[0,1]³` as six bilinear faces with outward normals.
fn unit_cube() -> Mesh {
    let coords: Vec<Vec3> = (0..8)
        .map(|k| Vec3::new((k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64))
        .collect();
    // Nodes in tensor order (ξ¹ fastest), oriented so a₁ × a₂ points out.
    let faces = [
        [0, 2, 1, 3], // z = 0
        [4, 5, 6, 7], // z = 1
        [0, 1, 4, 5], // y = 0
        [2, 6, 3, 7], // y = 1
        [0, 4, 2, 6], // x = 0
        [1, 3, 5, 7], // x = 1
    ];
    let elements = faces
        .iter()
        .map(|f| Element {
            basis: ElementBasis::LagrangeLinear,
            nodes: f.to_vec(),
        })
        .collect();
    Mesh::new(coords, elements, BTreeMap::new(), true, 1.0).unwrap()
}

/// Face-by-face `(1/3) Σ (x_f·n_f) A_f` for planar faces, from corner data only.
fn planar_faces_volume(mesh: &Mesh, coords: &[Vec3]) -> f64 {
    mesh.elements
        .iter()
        .map(|el| {
            let [a, b, c, _] = [0, 1, 2, 3].map(|i| coords[el.nodes[i]]);
            let cross = (b - a).cross(&(c - a));
            a.dot(&cross) / 3.0
        })
        .sum()
}

#[test]
fn cube_volume_matches_face_oracle() {
    let cube = unit_cube();
    let v = enclosed_volume(&cube, &cube.ref_coords, None).unwrap();
    let oracle = planar_faces_volume(&cube, &cube.ref_coords);
    assert!((oracle - 1.0).abs() < 1e-15);
    assert!((v - oracle).abs() < 1e-14, "{v}");
}

#[test]
fn cube_scaled_anisotropically() {
    let cube = unit_cube();
    let coords: Vec<Vec3> = cube
        .ref_coords
        .iter()
        .map(|x| Vec3::new(2.0 * x.x, 3.0 * x.y, 0.5 * x.z))
        .collect();
    let v = enclosed_volume(&cube, &coords, None).unwrap();
    assert!((v - 3.0).abs() < 1e-13);
    assert!((planar_faces_volume(&cube, &coords) - 3.0).abs() < 1e-13);
}

#[test]
fn nurbs_sphere_volume_and_area() {
    let mesh = make_sphere(OctantSet::Full, 2, 2, ElementKind::Nurbs, 1.5).unwrap();
    let v = enclosed_volume(&mesh, &mesh.ref_coords, Some(6)).unwrap();
    assert!((v / (4.0 * PI / 3.0 * 1.5f64.powi(3)) - 1.0).abs() < 1e-7);
    let mut area = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let xe = mesh.element_coords(e, &mesh.ref_coords);
        let rule = memfem_core::master_element::gauss_rule(6).unwrap();
        for (xi, w) in rule.iter() {
            area += w * frame(&eval_basis(&el.basis, xi).unwrap(), &xe, false)
                .unwrap()
                .ja;
        }
    }
    assert!((area / (4.0 * PI * 2.25) - 1.0).abs() < 1e-7);
}

#[test]
fn linear_octant_volume_converges_at_second_order() {
    let exact = PI / 6.0;
    let errs: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&n| {
            let mesh = make_sphere_octant(n, n, ElementKind::LagrangeLinear, 1.0).unwrap();
            (enclosed_volume(&mesh, &mesh.ref_coords, None).unwrap() - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.8 && rate < 2.2, "rate {rate}, errors {errs:?}");
    }
}

#[test]
fn flat_sheet_has_zero_volume_and_upward_normal() {
    let mesh = make_square_sheet(3, ElementKind::LagrangeQuadratic, 2.0, 1.0).unwrap();
    assert!(
        enclosed_volume(&mesh, &mesh.ref_coords, None)
            .unwrap()
            .abs()
            < 1e-15
    );
    let xe = mesh.element_coords(4, &mesh.ref_coords);
    let f = frame(
        &eval_basis(&mesh.elements[4].basis, [0.1, 0.2]).unwrap(),
        &xe,
        true,
    )
    .unwrap();
    assert!((f.n - Vec3::z()).norm() < 1e-14);
    assert!(mean_curvature_trace(&f).unwrap().abs() < 1e-14);
}

fn kinds() -> impl Strategy<Value = ElementKind> {
    prop_oneof![
        Just(ElementKind::Nurbs),
        Just(ElementKind::LagrangeQuadratic),
        Just(ElementKind::LagrangeLinear),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nurbs_sphere_frame_is_exact(
        radius in 0.2f64..5.0,
        e in 0usize..4,
        a in -0.95f64..0.95,
        b in -0.95f64..0.95,
    ) {
        let mesh = make_sphere_octant(2, 2, ElementKind::Nurbs, radius).unwrap();
        let xe = mesh.element_coords(e, &mesh.ref_coords);
        let ev = eval_basis(&mesh.elements[e].basis, [a, b]).unwrap();
        let f = frame(&ev, &xe, true).unwrap();
        let x = interpolate(&ev, &xe);
        prop_assert!((x.norm() / radius - 1.0).abs() < 1e-12);
        prop_assert!((f.n - x / x.norm()).norm() < 1e-11);
        let h = mean_curvature_trace(&f).unwrap();
        prop_assert!((h * radius + 2.0).abs() < 1e-9, "trace {}", h);
    }

    #[test]
    fn dual_basis_is_reciprocal(kind in kinds(), a in -1.0f64..1.0, b in -1.0f64..1.0, s in 0.5f64..2.0) {
        let mesh = make_sphere_octant(2, 2, kind, 1.0).unwrap();
        let coords: Vec<Vec3> = mesh.ref_coords.iter().map(|x| Vec3::new(s * x.x, x.y, x.z / s)).collect();
        let xe = mesh.element_coords(1, &coords);
        let f = frame(&eval_basis(&mesh.elements[1].basis, [a, b]).unwrap(), &xe, false).unwrap();
        for i in 0..2 {
            prop_assert!(f.n.dot(&f.a[i]).abs() < 1e-13);
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((f.a_dual[i].dot(&f.a[j]) - delta).abs() < 1e-12);
                let mixed: f64 = (0..2).map(|k| f.a_con[i][k] * f.a_cov[k][j]).sum();
                prop_assert!((mixed - delta).abs() < 1e-12);
            }
        }
        prop_assert!((f.ja - f.a[0].cross(&f.a[1]).norm()).abs() < 1e-13);
        prop_assert!((f.n.norm() - 1.0).abs() < 1e-14);
    }

    /// Polynomial faces only: `x·(a₁ × a₂)` is then integrated exactly.
    #[test]
    fn closed_volume_is_translation_invariant(
        kind in prop_oneof![Just(ElementKind::LagrangeQuadratic), Just(ElementKind::LagrangeLinear)],
        t in prop::array::uniform3(-3.0f64..3.0),
        wobble in 0.0f64..0.1,
    ) {
        let mesh = make_sphere(OctantSet::Full, 2, 2, kind, 1.0).unwrap();
        let coords: Vec<Vec3> = mesh
            .ref_coords
            .iter()
            .enumerate()
            .map(|(i, x)| x * (1.0 + wobble * (i as f64 * 0.7).sin()))
            .collect();
        let moved: Vec<Vec3> = coords.iter().map(|x| x + Vec3::from(t)).collect();
        let v0 = enclosed_volume(&mesh, &coords, None).unwrap();
        let v1 = enclosed_volume(&mesh, &moved, None).unwrap();
        prop_assert!(v0 > 0.0);
        prop_assert!((v1 - v0).abs() < 1e-10 * v0, "{} vs {}", v0, v1);
    }
}
