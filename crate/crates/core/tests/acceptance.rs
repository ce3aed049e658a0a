//! Acceptance checks, one line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqmkz::bounds::{self, DEFAULT_RESOLUTION};
use pqmkz::calculus::pq_int;
use pqmkz::moments::{self, default_report_grid};
use pqmkz::operator::{self, uniform_grid};
use pqmkz::oracle::{self, rat, Rational};
use pqmkz::statistical::{self, korovkin_grid, SequenceScheme};
use pqmkz::{Function, PQParams, TruncationPolicy};

type Check = Result<String, String>;
type Real = fn(f64) -> f64;

fn ensure(ok: bool, detail: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(detail.into())
    }
}

fn params(n: u32, p: f64, q: f64) -> PQParams {
    PQParams::from_parts(n, p, q).expect("valid parameters")
}

fn normalization() -> Check {
    let policy = TruncationPolicy::default();
    let grid = uniform_grid(101, 0.0, 0.99);
    let mut worst = 0.0_f64;
    for n in 1..=10 {
        for (p, q) in [(1.0, 0.9), (0.95, 0.9), (0.9, 0.8)] {
            for &x in &grid {
                let o = operator::evaluate(params(n, p, q), &Function::one(), x, &policy)
                    .map_err(|e| e.to_string())?;
                let d = (o.value - 1.0).abs();
                worst = worst.max(d);
                ensure(
                    d <= policy.tail_tol + 1e-13,
                    format!("n={n} p={p} q={q} x={x}: |M(1)-1| = {d:e}"),
                )?;
            }
        }
    }
    Ok(format!("max |M(1;x) - 1| = {worst:.3e} over 3030 points"))
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut widest = 0.0_f64;
    for i in 0..200 {
        let n = rng.gen_range(1..=8u32);
        let p_num = rng.gen_range(40..=64i64);
        let q_num = rng.gen_range(1..p_num);
        let x_num = rng.gen_range(0..=32i64);
        let degree = rng.gen_range(0..=3usize);
        let coeffs_num: Vec<i64> = (0..=degree).map(|_| rng.gen_range(-48..=48i64)).collect();

        let (p, q, x) = (rat(p_num, 64), rat(q_num, 64), rat(x_num, 64));
        let coeffs: Vec<Rational> = coeffs_num.iter().map(|&c| rat(c, 16)).collect();
        let bracket = oracle::exact_polynomial_bracket(n, &p, &q, &x, &coeffs, oracle::MAX_TERMS)
            .map_err(|e| e.to_string())?;

        let cf: Vec<f64> = coeffs_num.iter().map(|&c| c as f64 / 16.0).collect();
        let sup: f64 = cf
            .iter()
            .map(|c| c.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        let f = Function::new("poly", move |t| {
            cf.iter().rev().fold(0.0, |acc, c| acc * t + c)
        });
        let policy = TruncationPolicy::default().with_sup_bound(sup).unwrap();
        let pp = params(n, p_num as f64 / 64.0, q_num as f64 / 64.0);
        let o =
            operator::evaluate(pp, &f, x_num as f64 / 64.0, &policy).map_err(|e| e.to_string())?;

        let v = oracle::from_f64(o.value);
        let eb = oracle::from_f64(o.error_bound);
        let inside = &bracket.lower - &eb <= v && v <= &bracket.upper + &eb;
        ensure(
            inside,
            format!(
                "instance {i}: n={n} p={p} q={q} x={x} coeffs={coeffs_num:?}: {} not in [{}, {}] +- {:e}",
                o.value,
                oracle::to_f64(&bracket.lower),
                oracle::to_f64(&bracket.upper),
                o.error_bound
            ),
        )?;
        widest = widest.max(oracle::to_f64(&bracket.width()));
    }
    Ok(format!(
        "200 instances inside exact brackets (widest bracket {widest:.2e})"
    ))
}

fn pascal_identities() -> Check {
    let pairs = [
        (1, 1, 1, 2),
        (9, 10, 4, 5),
        (19, 20, 9, 10),
        (1, 1, 1, 3),
        (7, 8, 3, 4),
    ];
    let mut count = 0;
    for (pn, pd, qn, qd) in pairs {
        let (p, q) = (rat(pn, pd), rat(qn, qd));
        for n in 2..=12 {
            for k in 1..n {
                let (a, b) =
                    oracle::exact_pascal_residuals(n, k, &p, &q).map_err(|e| e.to_string())?;
                ensure(
                    a == rat(0, 1) && b == rat(0, 1),
                    format!("n={n} k={k} p={p} q={q}: residual {a}, {b}"),
                )?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} exact residual pairs are zero"))
}

/// q-MKZ operator coded from scratch: q-binomials from the q-Pascal rule
/// `C(k, j) = C(k-1, j) + q^k C(k, j-1)` with `C(k, j) = binom_q(j + k, k)`.
fn q_mkz(n: u32, q: f64, f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    if x == 1.0 {
        return f(1.0);
    }
    let n = n as usize;
    let prefactor: f64 = (0..=n).map(|s| 1.0 - q.powi(s as i32) * x).product();
    let mut row = vec![1.0_f64; n + 1];
    let mut xk = 1.0;
    let mut qk = 1.0;
    let mut sum = prefactor * f(0.0);
    let q_n = q.powi(n as i32);
    let mut prev = f64::INFINITY;
    for k in 1..200_000usize {
        qk *= q;
        xk *= x;
        for j in 1..=n {
            row[j] += qk * row[j - 1];
        }
        let w = prefactor * row[n] * xk;
        let node = (1.0 - qk) / (1.0 - qk * q_n);
        sum += w * f(node);
        if k > 50 && w < prev && w < 1e-20 {
            break;
        }
        prev = w;
    }
    sum
}

fn q_reduction() -> Check {
    // A tail tolerance well below the comparison threshold, so truncation
    // does not eat the whole margin.
    let policy = TruncationPolicy::new(1e-15, 1_000_000)
        .unwrap()
        .with_sup_bound(1.0)
        .unwrap();
    let grid = uniform_grid(11, 0.0, 1.0);
    let tests: [(&str, Real); 4] = [
        ("one", |_| 1.0),
        ("t^2", |t| t * t),
        ("cubic", |t| (t - 1.0 / 3.0) * (t - 0.5) * (t - 0.75)),
        ("abs", |t| (t - 0.5).abs()),
    ];
    let mut worst = 0.0_f64;
    for n in 1..=10 {
        for q in [0.5, 0.9, 0.99] {
            for (label, g) in tests {
                let f = Function::new(label, g);
                for &x in &grid {
                    let ours = operator::evaluate(params(n, 1.0, q), &f, x, &policy)
                        .map_err(|e| e.to_string())?;
                    let reference = q_mkz(n, q, &g, x);
                    let d = (ours.value - reference).abs();
                    worst = worst.max(d);
                    ensure(
                        d <= 1e-12,
                        format!("n={n} q={q} f={label} x={x}: {} vs {reference}", ours.value),
                    )?;
                }
            }
        }
    }
    Ok(format!("max deviation from independent q-MKZ {worst:.2e}"))
}

fn first_moment() -> Check {
    let policy = TruncationPolicy::default();
    let grid = uniform_grid(11, 0.0, 1.0);
    let mut worst = 0.0_f64;
    for n in 1..=10 {
        for q in [0.5, 0.9, 0.99] {
            for &x in &grid {
                let m1 = moments::raw_moment(params(n, 1.0, q), 1, x, &policy)
                    .map_err(|e| e.to_string())?;
                let d = (m1.value - x).abs();
                worst = worst.max(d);
                ensure(
                    d <= m1.error_bound,
                    format!(
                        "n={n} q={q} x={x}: defect {d:e} > bound {:e}",
                        m1.error_bound
                    ),
                )?;
            }
        }
    }
    let mut reported = 0.0_f64;
    for n in 1..=10 {
        for &x in &grid {
            let m1 = moments::raw_moment(params(n, 0.9, 0.8), 1, x, &policy)
                .map_err(|e| e.to_string())?;
            reported = reported.max((m1.value - x).abs());
        }
    }
    Ok(format!(
        "p=1 max defect {worst:.2e}; p=0.9,q=0.8 defect {reported:.2e} (reported)"
    ))
}

fn second_moment_bounds() -> Check {
    let policy = TruncationPolicy::default();
    let grid = default_report_grid();
    let mut min_slack = f64::INFINITY;
    for n in 1..=10 {
        for q in [0.9, 0.99] {
            for r in moments::moment_bounds_report(params(n, 1.0, q), &grid, &policy) {
                let r = r.map_err(|e| e.to_string())?;
                ensure(
                    r.lower_ok && r.upper_ok,
                    format!("n={n} q={q} x={}: slack {:?}", r.x, r.slack),
                )?;
                min_slack = min_slack.min(r.slack[0].min(r.slack[1]));
            }
        }
    }
    let mut negative = 0;
    let mut violated = 0;
    for r in moments::moment_bounds_report(params(20, 0.9, 0.85), &grid, &policy) {
        let r = r.map_err(|e| e.to_string())?;
        negative += (r.central_bound < 0.0) as usize;
        violated += (!r.central_ok) as usize;
    }
    Ok(format!(
        "p=1 min slack {min_slack:.2e}; p=0.9,q=0.85,n=20: central bound negative at {negative}/102 points, violated at {violated}"
    ))
}

fn uniform_modulus_bound() -> Check {
    let policy = TruncationPolicy::default();
    let grid = default_report_grid();
    // All three functions are 1-Lipschitz, so the lattice estimate of the
    // modulus is within 2/(R-1) of the true value.
    let lattice_slack = 4.0 / (DEFAULT_RESOLUTION - 1) as f64;
    let fs = [
        Function::identity(),
        Function::cubic(),
        Function::abs_centered(),
    ];
    let mut tightest = f64::INFINITY;
    for f in &fs {
        for q in [0.9, 0.99] {
            for n in [5, 10, 20] {
                let r = bounds::bound_report(
                    params(n, 1.0, q),
                    f,
                    &grid,
                    &policy,
                    DEFAULT_RESOLUTION,
                    None,
                )
                .map_err(|e| e.to_string())?;
                let limit = r.uniform_bound + lattice_slack + r.max_error_bound;
                ensure(
                    r.empirical_sup_error <= limit,
                    format!(
                        "{} n={n} q={q}: {} > {limit}",
                        f.label(),
                        r.empirical_sup_error
                    ),
                )?;
                tightest = tightest.min(limit - r.empirical_sup_error);
            }
        }
    }
    Ok(format!("18 cases hold; smallest margin {tightest:.3e}"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pqmkz::cli::run(
        std::iter::once("pqmkz").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    if code != 0 {
        return Err(format!("exit {code}: {}", String::from_utf8_lossy(&err)));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect())
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("bad number `{s}`"))
}

fn figure_partial_sums() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(&["figure", "1", "--out", dir.path().to_str().unwrap()])?;
    let rows = csv_rows(&dir.path().join("figure1.csv"))?;
    ensure(rows.len() == 201, format!("{} rows", rows.len()))?;
    let mut at_half = None;
    for r in &rows {
        let x = num(&r[0])?;
        let (s100, s500) = (num(&r[1])?, num(&r[4])?);
        if x <= 0.9 {
            ensure(
                (s500 - 1.0).abs() <= (s100 - 1.0).abs(),
                format!("x={x}: S500={s500} S100={s100}"),
            )?;
        }
        if x == 0.5 {
            at_half = Some(s500);
        }
        if x == 0.0 {
            ensure(s100 == 1.0 && s500 == 1.0, "x=0 row is not exactly 1")?;
        }
    }
    let s = at_half.ok_or("no x = 0.5 row")?;
    ensure((s - 1.0).abs() <= 1e-9, format!("S500(0.5) = {s}"))?;
    let worst = rows
        .iter()
        .filter(|r| num(&r[0]).is_ok_and(|x| x <= 0.9))
        .map(|r| num(&r[2]).unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    Ok(format!(
        "S500 at least as close as S100 for x <= 0.9; max S100 tail {worst:.2e}"
    ))
}

fn figure_convergence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(&["figure", "2", "--out", dir.path().to_str().unwrap()])?;
    let rows = csv_rows(&dir.path().join("figure2_summary.csv"))?;
    ensure(rows.len() == 3, format!("{} summary rows", rows.len()))?;
    let gaps: Vec<f64> = rows.iter().map(|r| num(&r[3])).collect::<Result<_, _>>()?;
    ensure(
        gaps[1] < gaps[0] && gaps[2] < gaps[1],
        format!("sup gaps {gaps:?}"),
    )?;
    ensure(rows.iter().all(|r| r[5] == "true"), "unconverged series")?;
    Ok(format!(
        "sup gaps {:.4e} > {:.4e} > {:.4e}",
        gaps[0], gaps[1], gaps[2]
    ))
}

fn scheme_limits() -> Check {
    let s = SequenceScheme::reference();
    let pq = s.pair(1000).map_err(|e| e.to_string())?;
    let dq = (pq.q().powi(1000) - (-1.0_f64).exp()).abs();
    let dp = (pq.p().powi(1000) - (-0.5_f64).exp()).abs();
    ensure(dq < 1e-3, format!("|q^n - 1/e| = {dq:e}"))?;
    ensure(dp < 1e-3, format!("|p^n - e^(-1/2)| = {dp:e}"))?;
    let mut largest = 0.0_f64;
    for n in 200..=statistical::SCHEME_CHECK_LIMIT {
        let v = 1.0 / pq_int(n as u64, s.pair(n).map_err(|e| e.to_string())?);
        largest = largest.max(v);
        ensure(v < 0.05, format!("1/[{n}] = {v}"))?;
    }
    Ok(format!(
        "|q^n-1/e|={dq:.2e}, |p^n-e^-1/2|={dp:.2e}, max 1/[n] over 200..=10^4 is {largest:.4}"
    ))
}

fn statistical_korovkin() -> Check {
    let r = statistical::st_korovkin_check(
        &SequenceScheme::reference(),
        &Function::cubic(),
        0.2,
        &[50, 100, 200],
        &korovkin_grid(),
        &TruncationPolicy::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for rep in &r.reports {
        ensure(
            rep.is_nonincreasing(),
            format!("{}: densities {:?}", rep.function, rep.densities),
        )?;
        summary.push(format!("{}={:?}", rep.function, rep.densities));
    }
    ensure(
        r.reports[0].densities[2] == 0.0,
        "density for g = 1 is not 0 at N = 200",
    )?;
    Ok(summary.join(" "))
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_pqmkz");
    let runs: [&[&str]; 8] = [
        &[
            "eval", "--n", "4", "--p", "0.95", "--q", "0.9", "--fn", "sin(3*x)", "--grid", "41",
        ],
        &[
            "moments", "--n", "6", "--p", "0.9", "--q", "0.8", "--format", "json",
        ],
        &[
            "bounds",
            "--n",
            "5",
            "--fn",
            "abs(x-0.5)",
            "--resolution",
            "257",
            "--alpha",
            "1",
            "--lip-M",
            "1",
        ],
        &[
            "bounds",
            "--n",
            "5",
            "--fn",
            "paper_cubic",
            "--resolution",
            "257",
            "--format",
            "json",
        ],
        &["identity", "--n", "3", "--p", "0.95", "--q", "0.9"],
        &["figure", "1"],
        &["figure", "2"],
        &[
            "stat",
            "--eps",
            "0.2",
            "--Ns",
            "50,100,200",
            "--fn",
            "x^2",
            "--format",
            "json",
        ],
    ];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let dir = root.path().join(format!("{i}-{attempt}"));
            std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
            let target = if args[0] == "figure" {
                dir.clone()
            } else {
                dir.join("out")
            };
            let status = Command::new(bin)
                .args(*args)
                .arg("--out")
                .arg(&target)
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            ensure(status.success(), format!("{args:?} exited with {status}"))?;
            let mut names: Vec<_> = std::fs::read_dir(&dir)
                .map_err(|e| e.to_string())?
                .map(|e| e.unwrap().file_name())
                .collect();
            names.sort();
            let contents: Vec<_> = names
                .iter()
                .map(|n| (n.clone(), std::fs::read(dir.join(n)).unwrap()))
                .collect();
            outputs.push(contents);
        }
        ensure(
            outputs[0] == outputs[1],
            format!("{args:?}: outputs differ between runs"),
        )?;
        files += outputs[0].len();
    }
    Ok(format!(
        "{} commands, {files} files byte-identical across two runs",
        runs.len()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "normalization",
            limit: Some(Duration::from_secs(10)),
            check: normalization,
        },
        Criterion {
            id: 2,
            name: "oracle equivalence",
            limit: Some(Duration::from_secs(60)),
            check: oracle_equivalence,
        },
        Criterion {
            id: 3,
            name: "pascal identities",
            limit: None,
            check: pascal_identities,
        },
        Criterion {
            id: 4,
            name: "q-MKZ reduction",
            limit: None,
            check: q_reduction,
        },
        Criterion {
            id: 5,
            name: "first moment at p = 1",
            limit: None,
            check: first_moment,
        },
        Criterion {
            id: 6,
            name: "second moment bounds",
            limit: None,
            check: second_moment_bounds,
        },
        Criterion {
            id: 7,
            name: "uniform modulus bound",
            limit: None,
            check: uniform_modulus_bound,
        },
        Criterion {
            id: 8,
            name: "partial sums figure",
            limit: Some(Duration::from_secs(5)),
            check: figure_partial_sums,
        },
        Criterion {
            id: 9,
            name: "convergence figure",
            limit: None,
            check: figure_convergence,
        },
        Criterion {
            id: 10,
            name: "scheme limits",
            limit: None,
            check: scheme_limits,
        },
        Criterion {
            id: 11,
            name: "statistical korovkin",
            limit: Some(Duration::from_secs(120)),
            check: statistical_korovkin,
        },
        Criterion {
            id: 12,
            name: "determinism",
            limit: None,
            check: determinism,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => {
                Err(format!("took {elapsed:.2?}, limit {limit:?}"))
            }
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!(
                "PASS criterion {:>2} {:<24} {:>9.2?}  {detail}",
                c.id, c.name, elapsed
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "FAIL criterion {:>2} {:<24} {:>9.2?}  {detail}",
                    c.id, c.name, elapsed
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
