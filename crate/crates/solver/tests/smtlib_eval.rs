//! The emitted SMT-LIB text is read back by a small interpreter written
//! here and evaluated under random assignments; it must agree with the
//! IR's own semantics. If an external solver binary is on PATH the scripts
//! are also cross-checked against it.

use std::collections::BTreeMap;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrapcheck_solver::smtlib::to_smt2;
use wrapcheck_solver::{
    check_sat, eval_formula, Assignment, BinOp, BvTerm, Definition, Formula, Prop, Verdict,
};

#[derive(Debug, Clone)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn tokenize(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ';' => {
                while let Some(c) = chars.next() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            '|' => {
                chars.next();
                let mut s = String::from("|");
                for c in chars.by_ref() {
                    s.push(c);
                    if c == '|' {
                        break;
                    }
                }
                out.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    out
}

fn parse(tokens: &[String], pos: &mut usize) -> Sx {
    let t = &tokens[*pos];
    *pos += 1;
    if t == "(" {
        let mut items = Vec::new();
        while tokens[*pos] != ")" {
            items.push(parse(tokens, pos));
        }
        *pos += 1;
        Sx::List(items)
    } else {
        Sx::Atom(t.clone())
    }
}

#[derive(Clone, Copy, Debug)]
enum Val {
    Bv(u64, u32),
    Bool(bool),
}

fn m(w: u32) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1 << w) - 1
    }
}

fn sext(v: u64, w: u32) -> i128 {
    let v = v as i128;
    if v >> (w - 1) & 1 == 1 {
        v - (1i128 << w)
    } else {
        v
    }
}

struct Interp {
    env: BTreeMap<String, Val>,
}

impl Interp {
    fn bv(&self, e: &Sx) -> (u64, u32) {
        match self.eval(e) {
            Val::Bv(v, w) => (v, w),
            Val::Bool(_) => panic!("expected bitvector: {e:?}"),
        }
    }

    fn boolean(&self, e: &Sx) -> bool {
        match self.eval(e) {
            Val::Bool(b) => b,
            Val::Bv(..) => panic!("expected bool: {e:?}"),
        }
    }

    fn eval(&self, e: &Sx) -> Val {
        match e {
            Sx::Atom(a) if a == "true" => Val::Bool(true),
            Sx::Atom(a) if a == "false" => Val::Bool(false),
            Sx::Atom(a) if a.starts_with("#x") => {
                Val::Bv(u64::from_str_radix(&a[2..], 16).unwrap(), 4 * (a.len() as u32 - 2))
            }
            Sx::Atom(a) if a.starts_with("#b") => {
                Val::Bv(u64::from_str_radix(&a[2..], 2).unwrap(), a.len() as u32 - 2)
            }
            Sx::Atom(a) => *self.env.get(a).unwrap_or_else(|| panic!("unbound {a}")),
            Sx::List(items) => match &items[0] {
                Sx::List(head) => {
                    // Indexed operator: ((_ name i [j]) arg)
                    let name = match &head[1] {
                        Sx::Atom(n) => n.as_str(),
                        _ => panic!(),
                    };
                    let idx = |k: usize| match &head[k] {
                        Sx::Atom(n) => n.parse::<u32>().unwrap(),
                        _ => panic!(),
                    };
                    let (v, w) = self.bv(&items[1]);
                    match name {
                        "zero_extend" => Val::Bv(v, w + idx(2)),
                        "sign_extend" => {
                            let nw = w + idx(2);
                            Val::Bv((sext(v, w) as u64) & m(nw), nw)
                        }
                        "extract" => {
                            let (hi, lo) = (idx(2), idx(3));
                            Val::Bv((v >> lo) & m(hi - lo + 1), hi - lo + 1)
                        }
                        other => panic!("unknown indexed op {other}"),
                    }
                }
                Sx::Atom(op) => self.apply(op, &items[1..]),
            },
        }
    }

    fn apply(&self, op: &str, args: &[Sx]) -> Val {
        match op {
            "and" => Val::Bool(args.iter().all(|a| self.boolean(a))),
            "or" => Val::Bool(args.iter().any(|a| self.boolean(a))),
            "not" => Val::Bool(!self.boolean(&args[0])),
            "bvnot" => {
                let (v, w) = self.bv(&args[0]);
                Val::Bv(!v & m(w), w)
            }
            _ => {
                let (a, w) = self.bv(&args[0]);
                let (b, w2) = self.bv(&args[1]);
                assert_eq!(w, w2, "{op}");
                let wide = |x: u128| Val::Bv((x & m(w) as u128) as u64, w);
                match op {
                    "=" => Val::Bool(a == b),
                    "bvult" => Val::Bool(a < b),
                    "bvule" => Val::Bool(a <= b),
                    "bvugt" => Val::Bool(a > b),
                    "bvuge" => Val::Bool(a >= b),
                    "bvadd" => wide(a as u128 + b as u128),
                    "bvsub" => wide((a as u128).wrapping_add((!b & m(w)) as u128 + 1)),
                    "bvmul" => wide(a as u128 * b as u128),
                    "bvshl" => wide(if b >= w as u64 { 0 } else { (a as u128) << b }),
                    "bvlshr" => wide(if b >= w as u64 { 0 } else { (a >> b) as u128 }),
                    "bvashr" => wide((sext(a, w) >> b.min(w as u64 - 1)) as u128),
                    "bvor" => wide((a | b) as u128),
                    "bvand" => wide((a & b) as u128),
                    other => panic!("unknown op {other}"),
                }
            }
        }
    }
}

/// Runs the script's definitions and assertion under `values`.
fn eval_script(script: &str, values: &Assignment, widths: &BTreeMap<String, u32>) -> bool {
    let tokens = tokenize(script);
    let mut pos = 0;
    let mut interp = Interp {
        env: BTreeMap::new(),
    };
    let mut result = None;
    while pos < tokens.len() {
        let Sx::List(cmd) = parse(&tokens, &mut pos) else {
            panic!()
        };
        let Sx::Atom(head) = &cmd[0] else { panic!() };
        let name = |sx: &Sx| match sx {
            Sx::Atom(a) => a.clone(),
            _ => panic!(),
        };
        match head.as_str() {
            "declare-const" => {
                let n = name(&cmd[1]);
                let plain = n.trim_matches('|').to_string();
                interp.env.insert(n, Val::Bv(values[&plain], widths[&plain]));
            }
            "define-fun" => {
                let v = interp.eval(&cmd[4]);
                interp.env.insert(name(&cmd[1]), v);
            }
            "assert" => result = Some(interp.boolean(&cmd[1])),
            _ => {}
        }
    }
    result.expect("script asserts something")
}

fn gen_term(rng: &mut ChaCha8Rng, vars: &[(String, u32)], w: u32, depth: u32) -> BvTerm {
    if depth == 0 || rng.gen_bool(0.25) {
        let candidates: Vec<_> = vars.iter().filter(|(_, vw)| *vw == w).collect();
        if !candidates.is_empty() && rng.gen_bool(0.7) {
            let (n, vw) = candidates[rng.gen_range(0..candidates.len())];
            return BvTerm::defined(n.clone(), *vw);
        }
        return BvTerm::constant(rng.gen::<u64>() & wrapcheck_solver::mask(w), w).unwrap();
    }
    match rng.gen_range(0..12) {
        0 => BvTerm::not(gen_term(rng, vars, w, depth - 1)),
        1 if w >= 16 => {
            BvTerm::zero_ext(w / 2, gen_term(rng, vars, w / 2, depth - 1)).unwrap()
        }
        2 if w >= 16 => {
            BvTerm::sign_ext(w / 2, gen_term(rng, vars, w / 2, depth - 1)).unwrap()
        }
        3 if w <= 32 => BvTerm::extract(w - 1, 0, gen_term(rng, vars, w * 2, depth - 1)).unwrap(),
        _ => {
            let ops = [
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Shl,
                BinOp::LShr,
                BinOp::AShr,
                BinOp::Or,
                BinOp::And,
            ];
            BvTerm::binary(
                ops[rng.gen_range(0..ops.len())],
                gen_term(rng, vars, w, depth - 1),
                gen_term(rng, vars, w, depth - 1),
            )
            .unwrap()
        }
    }
}

fn gen_formula(rng: &mut ChaCha8Rng) -> Formula {
    let mut vars: Vec<(String, u32)> = vec![
        ("a".into(), 16),
        ("tp->rcv_nxt".into(), 32),
        ("get_size()".into(), 32),
        ("c".into(), 8),
        ("d".into(), 64),
    ];
    let mut defs = Vec::new();
    for i in 0..rng.gen_range(0..3) {
        let w = [8, 16, 32, 64][rng.gen_range(0..4)];
        let t = gen_term(rng, &vars, w, 2);
        let name = format!("t{i}");
        vars.push((name.clone(), w));
        defs.push(Definition { name, term: t });
    }
    let atoms: Vec<Prop> = (0..rng.gen_range(1..4))
        .map(|_| {
            let w = [8, 16, 32, 64][rng.gen_range(0..4)];
            let l = gen_term(rng, &vars, w, 3);
            let r = gen_term(rng, &vars, w, 2);
            match rng.gen_range(0..6) {
                0 => Prop::eq(l, r),
                1 => Prop::ne(l, r),
                2 => Prop::ult(l, r),
                3 => Prop::ule(l, r),
                4 => Prop::ugt(l, r),
                _ => Prop::uge(l, r),
            }
            .unwrap()
        })
        .collect();
    let prop = match rng.gen_range(0..3) {
        0 => Prop::And(atoms),
        1 => Prop::Or(atoms),
        _ => Prop::not(Prop::And(atoms)),
    };
    Formula::with_definitions(defs, prop).unwrap()
}

#[test]
fn emitted_scripts_evaluate_like_the_ir() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5317);
    for _ in 0..400 {
        let f = gen_formula(&mut rng);
        let script = to_smt2(&f, &[]);
        let widths: BTreeMap<String, u32> =
            f.free_vars().iter().map(|(n, w)| (n.clone(), w.bits())).collect();
        for _ in 0..20 {
            let a: Assignment = widths
                .iter()
                .map(|(n, &w)| (n.clone(), rng.gen::<u64>() & wrapcheck_solver::mask(w)))
                .collect();
            assert_eq!(
                eval_script(&script, &a, &widths),
                eval_formula(&f, &a).unwrap(),
                "{script}"
            );
        }
    }
}

fn external_solver() -> Option<&'static str> {
    ["z3", "cvc5", "bitwuzla"].into_iter().find(|bin| {
        Command::new(bin)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    })
}

#[test]
fn external_solver_agrees_when_available() {
    let Some(bin) = external_solver() else {
        println!("no external SMT solver on PATH; skipping cross-check");
        return;
    };
    let dir = std::env::temp_dir().join("wrapcheck-smt-xcheck");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    for i in 0..50 {
        let f = gen_formula(&mut rng);
        let path = dir.join(format!("f{i}.smt2"));
        std::fs::write(&path, to_smt2(&f, &[]).replace("(get-model)\n", "")).unwrap();
        let out = Command::new(bin).arg(&path).output().unwrap();
        let theirs = String::from_utf8_lossy(&out.stdout).trim().to_string();
        let ours = match check_sat(&f).unwrap() {
            Verdict::Sat(_) => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown(_) => continue,
        };
        assert_eq!(theirs, ours, "{}", path.display());
    }
}
