// temporary: criterion 7/8 preflight at paper scale (s=61)
use die_scatter::krylov::{fair_memory_split, gmres_restarted, KrylovConfig};
use die_scatter::linalg::ONE;
use die_scatter::medium::*;
use die_scatter::operator::*;
use die_scatter::spectral::*;
use num_complex::Complex64;
use std::time::Instant;

fn main() {
    let bg = Background::unit();
    let side = 1.0;
    let h = 1.0 / 60.0;
    let grid = Grid::square_for_domain(side, h).unwrap();
    println!("grid {}x{} -> 3N = {}", grid.n1, grid.n2, 3 * grid.len());

    for eps in [Complex64::new(16.0, 0.0), Complex64::new(-16.0, 1.5)] {
        let spec = ScattererSpec::HomogeneousSquare { side, center: [0.0, 0.0], eps_rel: eps, mu_rel: ONE };
        let medium = rasterize(&spec, &grid, &bg).unwrap();
        let op = DieOperator::build_fast(&medium, &grid, &bg, Polarization::Te).unwrap();
        let reg = op.regularizer().unwrap();
        let b = incident_plane_wave(&grid, &bg, 0.0, IncidentConvention::PaperVerbatim);
        let system = Composed { outer: &reg, inner: &op };
        let mut rb = vec![Complex64::new(0.0, 0.0); b.data.len()];
        reg.apply_to(&b.data, &mut rb);

        // plain A u = b at restart 40
        let t0 = Instant::now();
        let cfg = KrylovConfig { restart: 40, tol: 1e-8, max_iters: 60000, ..Default::default() };
        let плain = gmres_restarted(&op, None, &b.data, &cfg).unwrap();
        println!("eps {eps}: plain A: {} iters, conv {}, {:.1}s", плain.record.iterations, плain.record.converged, t0.elapsed().as_secs_f64());

        // regularized A_R A at restart 40
        let t0 = Instant::now();
        let rega = gmres_restarted(&system, None, &rb, &cfg).unwrap();
        println!("  A_R A: {} iters, conv {}, {:.1}s", rega.record.iterations, rega.record.converged, t0.elapsed().as_secs_f64());

        // r from the deflation radius on A_R A, eigs tol 1e-4
        let t0 = Instant::now();
        let radius = deflation_radius(&medium.distinct_materials()).unwrap();
        let mut r_try = 8usize;
        let pairs = loop {
            let out = topk_eigs(&system, r_try, 1e-4).unwrap();
            let smallest = out.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            if smallest <= radius * (1.0 + 1e-9) || r_try >= 64 { break out; }
            r_try *= 2;
        };
        let outside: Vec<usize> = (0..pairs.values.len()).filter(|&i| pairs.values[i].norm() > radius * (1.0 + 1e-9)).collect();
        let values: Vec<Complex64> = outside.iter().map(|&i| pairs.values[i]).collect();
        let vectors: Vec<Vec<Complex64>> = outside.iter().map(|&i| pairs.vectors[i].clone()).collect();
        let basis = build_deflation(&system, &values, &vectors).unwrap();
        let r = basis.r;
        println!("  radius {radius:.4}, r = {r}, cond(T) = {:.2e}, offline {:.1}s", basis.cond_t, t0.elapsed().as_secs_f64());

        // deflated at fair memory
        let (_, restart_p) = fair_memory_split(40, r).unwrap();
        let t0 = Instant::now();
        let cfg_p = KrylovConfig { restart: restart_p, tol: 1e-8, max_iters: 60000, ..Default::default() };
        let defl = gmres_restarted(&system, Some(&basis), &rb, &cfg_p).unwrap();
        println!("  A_R A P^-1 (restart {restart_p}): {} iters, conv {}, {:.1}s", defl.record.iterations, defl.record.converged, t0.elapsed().as_secs_f64());
    }
}
