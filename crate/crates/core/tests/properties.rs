use condenser_core::*;
use proptest::prelude::*;

fn points(dim: usize, n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::collection::vec(lo..hi, dim), n)
        .prop_map(|v| v.into_iter().map(|c| Point::new(c).unwrap()).collect())
}

fn distinct(ps: &[Point]) -> bool {
    ps.iter()
        .enumerate()
        .all(|(i, p)| ps[..i].iter().all(|q| p.dist2(q) > 1e-6))
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..2.8, 0.05f64..0.5).prop_map(|(a, e)| KernelSpec::riesz(a, e)),
        (0.05f64..0.5).prop_map(KernelSpec::newtonian),
    ]
}

/// A two-plate condenser in R³ with plates in disjoint boxes, random weights
/// and a feasible constraint.
fn problem() -> impl Strategy<Value = (Condenser, KernelSpec, Vec<Vec<f64>>)> {
    (
        points(3, 6, 0.0, 1.0),
        points(3, 5, 2.0, 3.0),
        prop::collection::vec(0.5f64..2.0, 11),
        prop::collection::vec(0.2f64..1.0, 11),
        (0.3f64..1.5, 0.3f64..1.5),
        kernel(),
        prop::collection::vec(-1.0f64..1.0, 11),
    )
        .prop_filter("distinct nodes", |(a, b, ..)| distinct(a) && distinct(b))
        .prop_map(|(a, b, g, s, (ma, mb), k, f)| {
            let mk = |id, sign, nodes: Vec<Point>, g: &[f64], s: &[f64], m: f64| {
                let cap: f64 = g.iter().zip(s).map(|(g, s)| g * s).sum();
                let scale = 1.5 * m / cap;
                Plate::new(id, sign, nodes, g.to_vec(), m, s.iter().map(|x| x * scale).collect())
            };
            let c = Condenser::new(vec![
                mk(0, Sign::Positive, a, &g[..6], &s[..6], ma),
                mk(1, Sign::Negative, b, &g[6..], &s[6..], mb),
            ])
            .unwrap();
            (c, k, vec![f[..6].to_vec(), f[6..].to_vec()])
        })
}

fn measure(c: &Condenser, raw: &[f64]) -> VectorMeasure {
    VectorMeasure::from_flat(c, &raw[..c.total_nodes()]).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig {
        grad_tol: 1e-10,
        max_iters: Some(100_000),
        ..SolverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_exactly_symmetric(k in kernel(), ps in points(3, 2, -2.0, 2.0)) {
        prop_assert_eq!(k.evaluate(&ps[0], &ps[1]).unwrap(), k.evaluate(&ps[1], &ps[0]).unwrap());
    }

    #[test]
    fn gram_is_psd(k in kernel(), ps in points(3, 12, -1.0, 1.0), w in prop::collection::vec(-1.0f64..1.0, 12)) {
        prop_assume!(distinct(&ps));
        let g = assemble_gram(&k, &ps).unwrap();
        let d = diagnose(&g).unwrap();
        let v = nalgebra::DVector::from_vec(w);
        prop_assert!(v.dot(&(g.entries() * &v)) >= -d.pd_tol * v.norm_squared());
        prop_assert!(d.is_pd);
    }

    #[test]
    fn log_kernel_inside_disk_is_psd(r in prop::collection::vec((0.0f64..0.9, 0.0f64..std::f64::consts::TAU), 10), eps in 0.05f64..0.3) {
        let ps: Vec<Point> = r.iter().map(|(r, t)| Point::new(vec![r * t.cos(), r * t.sin()]).unwrap()).collect();
        prop_assume!(distinct(&ps));
        let g = assemble_gram(&KernelSpec::log_disk(eps), &ps).unwrap();
        prop_assert!(diagnose(&g).unwrap().is_pd);
    }

    #[test]
    fn regularization_error_is_quadratic(eps in 0.0f64..0.5, ps in points(3, 2, -3.0, 3.0)) {
        let d2 = ps[0].dist2(&ps[1]);
        prop_assume!(d2 >= 1.0);
        let exact = 1.0 / d2.sqrt();
        let reg = KernelSpec::riesz(2.0, eps).evaluate(&ps[0], &ps[1]).unwrap();
        prop_assert!((reg - exact).abs() <= eps * eps);
    }

    #[test]
    fn semimetric_axioms((c, k, _) in problem(), raw in prop::collection::vec(0.0f64..1.0, 33)) {
        let gm = c.gram(&k).unwrap();
        let (x, y, z) = (measure(&c, &raw[..11]), measure(&c, &raw[11..22]), measure(&c, &raw[22..]));
        let d = |a: &VectorMeasure, b: &VectorMeasure| semimetric_distance(&c, &gm, a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
    }

    #[test]
    fn distance_is_the_energy_polarization((c, k, _) in problem(), raw in prop::collection::vec(0.0f64..1.0, 22)) {
        let gm = c.gram(&k).unwrap();
        let (x, y) = (measure(&c, &raw[..11]), measure(&c, &raw[11..]));
        let d = semimetric_distance(&c, &gm, &x, &y).unwrap();
        let (exx, eyy, exy) = (
            energy(&c, &gm, &x).unwrap(),
            energy(&c, &gm, &y).unwrap(),
            mutual_energy(&c, &gm, &x, &y).unwrap(),
        );
        prop_assert!((d * d - (exx + eyy - 2.0 * exy)).abs() <= 1e-10 * (1.0 + exx + eyy));
        // parallelogram law in the energy inner product
        let sum = VectorMeasure::from_flat(&c, (x.flat() + y.flat()).as_slice()).unwrap();
        let e_sum = energy(&c, &gm, &sum).unwrap();
        prop_assert!((e_sum + d * d - 2.0 * exx - 2.0 * eyy).abs() <= 1e-9 * (1.0 + e_sum));
    }

    #[test]
    fn solver_output_is_admissible_and_bounded((c, k, f) in problem()) {
        let gm = c.gram(&k).unwrap();
        let field = Field::case1(&c, f).unwrap();
        let rep = solve(&c, &gm, &field, &cfg()).unwrap();
        for (i, p) in c.plates().iter().enumerate() {
            let w = rep.minimizer.plate(i);
            prop_assert!(w.iter().zip(&p.sigma).all(|(w, s)| *w >= 0.0 && *w <= *s));
        }
        for (m, p) in rep.minimizer.g_masses(&c).iter().zip(c.plates()) {
            prop_assert!((m - p.mass).abs() <= 1e-10 * p.mass);
        }
        let again = weighted_energy(&c, &gm, &field, &rep.minimizer).unwrap();
        prop_assert!((again - rep.value).abs() <= 1e-12 * (1.0 + again.abs()));
        let bound: f64 = c
            .plates()
            .iter()
            .zip(field.max_abs())
            .map(|(p, m)| p.mass * m / p.g.iter().cloned().fold(f64::INFINITY, f64::min))
            .sum();
        prop_assert!(rep.value >= -2.0 * bound);
        prop_assert!(verify_kkt(&c, &gm, &field, &rep.minimizer, 1e-6).unwrap().ok);
    }

    #[test]
    fn objective_is_midpoint_convex((c, k, f) in problem(), raw in prop::collection::vec(0.0f64..1.0, 22)) {
        let gm = c.gram(&k).unwrap();
        let field = Field::case1(&c, f).unwrap();
        let (x, y) = (measure(&c, &raw[..11]), measure(&c, &raw[11..]));
        let mid = VectorMeasure::from_flat(&c, ((x.flat() + y.flat()) * 0.5).as_slice()).unwrap();
        let g = |m: &VectorMeasure| weighted_energy(&c, &gm, &field, m).unwrap();
        prop_assert!(g(&mid) <= 0.5 * (g(&x) + g(&y)) + 1e-10 * (1.0 + g(&x).abs() + g(&y).abs()));
    }

    #[test]
    fn minimizers_from_two_starts_have_convex_midpoint((c, k, f) in problem(), seed in 1u64..1000) {
        let gm = c.gram(&k).unwrap();
        let field = Field::case1(&c, f).unwrap();
        let a = solve(&c, &gm, &field, &cfg()).unwrap();
        let b = solve(&c, &gm, &field, &SolverConfig { seed, ..cfg() }).unwrap();
        let mid = VectorMeasure::from_flat(&c, ((a.minimizer.flat() + b.minimizer.flat()) * 0.5).as_slice()).unwrap();
        let gmid = weighted_energy(&c, &gm, &field, &mid).unwrap();
        prop_assert!(gmid <= a.value.max(b.value) + 1e-10);
        prop_assert!(semimetric_distance(&c, &gm, &a.minimizer, &b.minimizer).unwrap() <= 1e-5);
    }

    #[test]
    fn capacity_grows_with_the_node_set(ps in points(3, 14, -1.0, 1.0), drop in 1usize..7) {
        prop_assume!(distinct(&ps));
        let k = KernelSpec::newtonian(0.1);
        let full = assemble_gram(&k, &ps).unwrap();
        let part = assemble_gram(&k, &ps[drop..]).unwrap();
        let big = equilibrium(&ps, &full, None, &cfg()).unwrap();
        let small = equilibrium(&ps[drop..], &part, None, &cfg()).unwrap();
        prop_assert!(small.capacity <= big.capacity + 1e-10);
        prop_assert!(big.frostman_ok());
        let total: f64 = big.unit_minimizer.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn balayage_contracts_energy(
        target in points(3, 15, -1.0, 1.0),
        src in points(3, 3, 1.5, 2.5),
        w in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        prop_assume!(distinct(&target) && distinct(&src));
        let source = ScalarSignedMeasure::new(src, w).unwrap();
        let rep = balayage(&KernelSpec::newtonian(0.1), &source, &target, &cfg()).unwrap();
        prop_assert!(rep.swept_norm <= rep.source_norm + 1e-8);
        prop_assert!(rep.potential_residual <= 1e-8);
        prop_assert!(rep.swept.iter().all(|b| *b >= 0.0));
    }
}
