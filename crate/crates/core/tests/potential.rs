use transonic::duct::{Duct, DuctConfig};
use transonic::potential::{fixed_point_solve, sonic_check, sonic_surface, PotentialConfig, PotentialProblem};
use transonic::Error;

fn duct() -> Duct {
    Duct::build(&DuctConfig { modes: 9, symmetric: true, ..Default::default() }).unwrap()
}

#[test]
fn converged_flow_meets_every_invariant() {
    let duct = duct();
    let pb = PotentialProblem::new(&duct, &PotentialConfig::default()).unwrap();
    let sol = fixed_point_solve(&pb).unwrap();
    let log = sol.iteration_log();
    assert!(sol.converged, "{log}");
    for r in sol.history.iter().skip(1) {
        assert!(r.ratio.unwrap() <= 0.5, "{log}");
    }
    assert!(sol.ball_max <= pb.delta0, "{log}");
    assert!(sol.residual <= 1e-6, "{log}");
    assert!(sol.bernoulli_defect <= 1e-9, "{log}");
    assert!(sol.wall_normal_residual <= 1e-8, "{log}");
    assert!(sol.entrance_residual <= 1e-10, "{log}");
    assert!(sol.rho.iter().flatten().all(|r| *r > 0.0));
    let surf = sonic_surface(&duct, &sol.mach2).unwrap();
    assert!(surf.min_increment > 0.0);
    assert!(sonic_check(&pb, &sol, &surf).unwrap() <= 1e-8);
    assert!(surf.sup_xi > 0.0 && surf.sup_xi < 0.1 * pb.eps.sqrt());
}

#[test]
fn response_is_linear_in_the_amplitude() {
    let duct = duct();
    let run = |eps: f64| {
        let pb = PotentialProblem::new(&duct, &PotentialConfig { eps, ..Default::default() }).unwrap();
        let sol = fixed_point_solve(&pb).unwrap();
        let surf = sonic_surface(&duct, &sol.mach2).unwrap();
        (duct.disc.sobolev_norm(&sol.psi, 1), surf.sup_xi)
    };
    let (n1, x1) = run(5e-4);
    let (n2, x2) = run(1e-3);
    assert!((n2 / n1 - 2.0).abs() <= 0.4, "norm ratio {}", n2 / n1);
    assert!((x2 / x1 - 2.0).abs() <= 0.5, "sonic shift ratio {}", x2 / x1);
}

#[test]
fn oversized_entrance_datum_leaves_the_ball() {
    let duct = duct();
    let cfg = PotentialConfig { h0_amplitude: 1e-4, ..Default::default() };
    let pb = PotentialProblem::new(&duct, &cfg).unwrap();
    assert!(matches!(fixed_point_solve(&pb), Err(Error::BallEscape(_))));
}

#[test]
fn outputs_have_the_documented_columns() {
    let duct = Duct::build(&DuctConfig { modes: 4, symmetric: true, ..Default::default() }).unwrap();
    let pb = PotentialProblem::new(&duct, &PotentialConfig { eps: 0.0, ..Default::default() }).unwrap();
    let sol = fixed_point_solve(&pb).unwrap();
    let mut buf = Vec::new();
    sol.write_fields_csv(&duct, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,x3,u1,u2,u3,rho,M2");
    assert_eq!(text.lines().count(), 1 + duct.disc.omega_nodes() * duct.disc.cs.npts());
    let surf = sonic_surface(&duct, &sol.mach2).unwrap();
    let mut buf = Vec::new();
    surf.write_csv(&duct, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("x2,x3,xi,dxi_dx2,dxi_dx3\n"));
    assert!(sol.iteration_log().contains("converged = true"));
}
