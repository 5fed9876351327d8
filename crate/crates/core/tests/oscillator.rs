use pvm_core::saccade::integrate;
use pvm_core::{SaccadeParams, SaccadeState};

fn quiet(dt: f64) -> SaccadeParams {
    SaccadeParams {
        noise: 0.0,
        dt,
        ..SaccadeParams::default()
    }
}

fn run(params: &SaccadeParams, steps: usize) -> SaccadeState {
    let mut s = SaccadeState::new([10.0, -10.0], 0);
    s.equilibrium = [0.0, 0.0];
    for _ in 0..steps {
        integrate(&mut s, params);
    }
    s
}

#[test]
fn matches_discrete_recurrence() {
    // matrix powers of the one-step update, computed independently
    let p = quiet(0.1);
    for (n, x, v) in [
        (1, 9.6, -4.0),
        (10, 4.0893436513663595, -4.633429728733269),
        (50, 0.05195761582255556, -0.05997824941773728),
    ] {
        let s = run(&p, n);
        assert!((s.gaze[0] - x).abs() < 1e-12, "n={n}: {} vs {x}", s.gaze[0]);
        assert!((s.velocity[0] - v).abs() < 1e-12);
        assert!((s.gaze[1] + x).abs() < 1e-12);
        assert!((s.velocity[1] + v).abs() < 1e-12);
    }
}

#[test]
fn small_steps_follow_the_overdamped_solution() {
    let p = quiet(1e-4);
    for (t, x) in [(0.5, 7.503526479160764), (1.0, 4.479607868463917), (3.0, 0.4101504567252567)] {
        let s = run(&p, (t / 1e-4_f64).round() as usize);
        assert!((s.gaze[0] - x).abs() < 2e-3 * x.abs().max(1.0), "t={t}: {} vs {x}", s.gaze[0]);
    }
}

#[test]
fn converges_to_equilibrium() {
    let mut s = SaccadeState::new([0.0, 0.0], 0);
    s.equilibrium = [5.0, -3.0];
    let p = quiet(0.1);
    for _ in 0..400 {
        integrate(&mut s, &p);
    }
    assert!((s.gaze[0] - 5.0).abs() < 1e-9 && (s.gaze[1] + 3.0).abs() < 1e-9);
}
