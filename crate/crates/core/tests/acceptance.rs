//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force_contact, config, random_suite, separation, two_body};
use flock::convergence::{cauchy_table, run_family};
use flock::diagnostics::{
    conservation_residual, dissipation_check, holder_exponent, integrability_all, integrability_probe,
    ordered_sums_check, Integrability,
};
use flock::scenario::{two_body_system, SuiteCase};
use flock::twobody::{bounded_weight_floor_check, critical_velocity, level_time_bound_check, stick_time};
use flock::{solve_piecewise, EventKind, ParticleSystem, PiecewiseTrajectory, WeightKernel};

const ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_critical_sticking() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.25, 0.75] {
        let dphi0 = critical_velocity(1.0, alpha).unwrap();
        let t0 = stick_time(1.0, alpha).unwrap();
        let brute = brute_force_contact(1.0, dphi0, alpha, 1e-7, 2.0 * t0, 1e-60);
        let traj = two_body(1.0, dphi0, alpha, 2.0 * t0, 1e-2);
        let sticks: Vec<_> = traj.events.iter().filter(|e| e.kind == EventKind::Sticking).collect();
        let ok_oracle = brute.is_some_and(|b| (b - t0).abs() <= 1e-3);
        let ok_sim = traj.events.len() == 1 && sticks.len() == 1 && (sticks[0].t_event - t0).abs() <= 1e-3;
        pass &= ok_oracle && ok_sim;
        parts.push(format!(
            "alpha={alpha}: t0={t0:.6} brute={:.6} sim={}",
            brute.unwrap_or(f64::NAN),
            sticks.first().map_or("none".to_string(), |e| format!("{:.6}", e.t_event))
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c2_trichotomy() -> Outcome {
    let fast = two_body(1.0, -5.0, 0.5, 2.0, 1e-2);
    let ok_fast = fast.events.len() == 1
        && fast.events[0].kind == EventKind::NonStickCollision
        && (fast.events[0].rel_speed - 1.0).abs() <= 1e-3;
    let slow = two_body(1.0, -3.0, 0.5, 20.0, 1e-2);
    let min_sep = separation(&slow).iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ok_slow = slow.events.is_empty() && (min_sep - 0.0625).abs() <= 1e-4;
    outcome(
        ok_fast && ok_slow,
        format!(
            "dphi0=-5: {} rel_speed={:.6}; dphi0=-3: events={} min_sep={min_sep:.6}",
            fast.events.first().map_or("none", |e| e.kind.as_str()),
            fast.events.first().map_or(f64::NAN, |e| e.rel_speed),
            slow.events.len()
        ),
    )
}

fn c3_conservation(suite: &[(SuiteCase, PiecewiseTrajectory)]) -> Outcome {
    let worst = suite
        .iter()
        .map(|(_, t)| conservation_residual(t).unwrap())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-8, format!("max mean-velocity drift {worst:.3e} over {} runs", suite.len()))
}

fn c4_dissipation(suite: &[(SuiteCase, PiecewiseTrajectory)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for (_, t) in suite {
        let d = dissipation_check(t).unwrap();
        worst = worst.max(d.r_violation);
        margin = margin.min(d.velocity_bound_margin);
    }
    outcome(
        worst <= 1e-8 && margin >= 0.0,
        format!("max r increment {worst:.3e}, min velocity bound margin {margin:.3e}"),
    )
}

fn c5_ordered_sums(suite: &[(SuiteCase, PiecewiseTrajectory)]) -> Outcome {
    let worst = suite.iter().map(|(_, t)| ordered_sums_check(t).unwrap()).fold(0.0, f64::max);
    outcome(worst <= 1e-8, format!("max ordered-sum violation {worst:.3e}"))
}

fn c6_holder() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in ALPHAS {
        let dphi0 = critical_velocity(1.0, alpha).unwrap();
        let t0 = stick_time(1.0, alpha).unwrap();
        let traj = two_body(1.0, dphi0, alpha, 1.2 * t0, 1e-4);
        match traj.events.first().map(|e| holder_exponent(&traj, e)) {
            Some(Ok(fit)) => {
                let ok = (fit.exponent - (1.0 - alpha)).abs() <= 0.1;
                pass &= ok;
                parts.push(format!("alpha={alpha}: fitted {:.3} vs {:.3}", fit.exponent, 1.0 - alpha));
            }
            other => {
                pass = false;
                parts.push(format!("alpha={alpha}: no fit ({other:?})"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn c7_integrability(suite: &[(SuiteCase, PiecewiseTrajectory)]) -> Outcome {
    let crit = two_body(1.0, -4.0, 0.5, 0.6, 1e-3);
    let t0 = crit.events[0].t_event;
    let crit_class = integrability_probe(&crit, (0, 1), t0).map(|r| r.1);
    let sub = two_body(1.0, -3.0, 0.5, 5.0, 1e-2);
    let sub_class = integrability_probe(&sub, (0, 1), 5.0).map(|r| r.1);
    let mut clashes = 0;
    for (_, t) in suite {
        let probes = integrability_all(t);
        for e in t.events.iter().filter(|e| e.kind == EventKind::Sticking) {
            clashes += probes
                .iter()
                .filter(|p| e.group.contains(&p.pair.0) && e.group.contains(&p.pair.1))
                .filter(|p| p.t_upper == e.t_event && p.class == Integrability::Finite)
                .count();
        }
    }
    outcome(
        matches!(crit_class, Ok(Integrability::Divergent)) && matches!(sub_class, Ok(Integrability::Finite)) && clashes == 0,
        format!("critical {crit_class:?}, subcritical {sub_class:?}, sticking/finite clashes {clashes}"),
    )
}

fn c8_level_times() -> Outcome {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for alpha in ALPHAS {
        for r in level_time_bound_check(1.0, alpha, 20).unwrap() {
            if r.n >= 2 {
                violations += usize::from(!r.ok);
                worst = worst.max(r.gap / r.bound);
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations, max gap/bound {worst:.4}"))
}

fn c9_floor() -> Outcome {
    let mut min_ratio = f64::INFINITY;
    for dphi0 in [-4.0, -1.0, 0.5, 3.0] {
        let check = bounded_weight_floor_check(1.0, dphi0, 1.0, 2.0, 5.0).unwrap();
        min_ratio = min_ratio.min(check.min_ratio);
    }
    outcome(min_ratio >= 1.0 - 1e-6, format!("min ratio {min_ratio:.9}"))
}

fn c10_convergence() -> Outcome {
    let n_list = [10, 100, 1000, 10_000];
    let sys = two_body_system(1.0, -4.0, WeightKernel::singular(0.5).unwrap()).unwrap();
    let fam = run_family(&sys, &n_list, &config(1.0, 1e-2)).unwrap();
    let rep = cauchy_table(&fam, &n_list).unwrap();
    let trend = rep.reference_gap_v.windows(2).all(|w| w[1] <= 2.0 * w[0]);

    let free = ParticleSystem::make_system(
        3,
        2,
        vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        vec![-0.5, -0.5, 1.0, 0.0, 0.0, 1.0],
        WeightKernel::singular(0.5).unwrap(),
    )
    .unwrap();
    let free_list = [5, 10, 100, 1000];
    let free_fam = run_family(&free, &free_list, &config(5.0, 1e-2)).unwrap();
    let min_sep = free_fam
        .iter()
        .flat_map(|t| t.samples())
        .flat_map(|s| {
            let p: Vec<&[f64]> = s.x.chunks(2).collect();
            [(0, 1), (0, 2), (1, 2)].map(|(i, j)| ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt())
        })
        .fold(f64::INFINITY, f64::min);
    let free_rep = cauchy_table(&free_fam, &free_list).unwrap();
    let free_gap = free_rep
        .reference_gap_x
        .iter()
        .chain(&free_rep.reference_gap_v)
        .chain(free_rep.sup_dx.iter().flatten())
        .chain(free_rep.sup_dv.iter().flatten())
        .fold(0.0f64, |a, &b| a.max(b));
    outcome(
        trend && min_sep >= 0.5 && free_gap <= 1e-8,
        format!(
            "critical reference gaps {:?}; collision-free min separation {min_sep:.3}, max gap {free_gap:.3e}",
            rep.reference_gap_v.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn c11_sticking_count(suite: &[(SuiteCase, PiecewiseTrajectory)]) -> Outcome {
    let head_on = ParticleSystem::make_system(
        4,
        1,
        vec![-3.0, -1.0, 1.0, 3.0],
        vec![2.0, 1.0, -1.0, -2.0],
        WeightKernel::singular(0.5).unwrap(),
    )
    .unwrap();
    let head_on = solve_piecewise(&head_on, &config(5.0, 1e-2)).unwrap();
    let mut pass = true;
    let mut total = 0;
    for t in suite.iter().map(|(_, t)| t).chain(std::iter::once(&head_on)) {
        total += t.sticking_count();
        pass &= t.sticking_count() < t.n && t.membership_monotone();
    }
    outcome(
        pass,
        format!(
            "{total} sticking events over {} runs; head-on run has {}",
            suite.len() + 1,
            head_on.sticking_count()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let suite = random_suite();
    let criteria: Vec<Criterion> = vec![
        ("two-body critical sticking", Box::new(c1_critical_sticking)),
        ("trichotomy", Box::new(c2_trichotomy)),
        ("conservation", Box::new(|| c3_conservation(&suite))),
        ("dissipation", Box::new(|| c4_dissipation(&suite))),
        ("ordered sums", Box::new(|| c5_ordered_sums(&suite))),
        ("Hölder exponent", Box::new(c6_holder)),
        ("integrability dichotomy", Box::new(|| c7_integrability(&suite))),
        ("level-time bound", Box::new(c8_level_times)),
        ("bounded-weight floor", Box::new(c9_floor)),
        ("convergence", Box::new(c10_convergence)),
        ("sticking-count bound", Box::new(|| c11_sticking_count(&suite))),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<28} {}  {}",
            k + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
