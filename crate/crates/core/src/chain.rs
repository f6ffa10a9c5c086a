//! Two-stage escalation chains: one encoding's corrupted output feeds a
//! bridgeable input of another, and the conjunction is decided as a whole.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;
use wrapcheck_solver::{check, BvError, BvTerm, CheckError, CheckOptions, Definition, Formula, Verdict};

use crate::encode::Encoding;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpec {
    pub stage1: Encoding,
    pub stage2: Encoding,
    /// Free variable of `stage2` that receives `stage1`'s output.
    pub bridge: String,
    pub label: String,
}

impl ChainSpec {
    /// Builds a spec, checking that the bridge endpoints exist and agree in
    /// width.
    pub fn new(stage1: Encoding, stage2: Encoding, bridge: impl Into<String>) -> Result<Self, ChainError> {
        let bridge = bridge.into();
        let out = stage1.output_var.clone().ok_or(ChainError::NoOutput(stage1.id.clone()))?;
        let w1 = stage1.formula.var_width(&out).ok_or(ChainError::NoOutput(stage1.id.clone()))?;
        let w2 = stage2
            .formula
            .free_vars()
            .get(&bridge)
            .map(|w| w.bits())
            .ok_or_else(|| ChainError::NotFree(bridge.clone()))?;
        if w1 != w2 {
            return Err(ChainError::WidthMismatch {
                output: out,
                output_width: w1,
                input: bridge,
                input_width: w2,
            });
        }
        let label = format!("{}\u{2192}{}", stage1.cwe, stage2.cwe);
        Ok(ChainSpec {
            stage1,
            stage2,
            bridge,
            label,
        })
    }

    pub fn output(&self) -> &str {
        self.stage1.output_var.as_deref().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("encoding {0} has no output variable")]
    NoOutput(String),
    #[error("bridge input `{0}` is not a free variable of the second stage")]
    NotFree(String),
    #[error("bridge width mismatch: `{output}` is {output_width} bits, `{input}` is {input_width} bits")]
    WidthMismatch {
        output: String,
        output_width: u32,
        input: String,
        input_width: u32,
    },
    #[error(transparent)]
    Bv(#[from] BvError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("chain is satisfiable but stage {0} alone is not")]
    Monotonicity(u8),
    #[error("chain witness does not satisfy stage 1 on its own")]
    Projection,
}

/// A composed formula plus the name the bridge carries inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composed {
    pub formula: Formula,
    pub bridge: String,
}

fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken.contains(n))
        .unwrap_or_else(|| unreachable!())
}

/// Conjoins both stages. Stage-2 names that clash with stage 1 are
/// renamed, except free variables of equal width, which are shared; the
/// bridge input becomes a definition equal to stage 1's output.
pub fn compose(spec: &ChainSpec) -> Result<Composed, ChainError> {
    let f1 = &spec.stage1.formula;
    let f2 = &spec.stage2.formula;
    let out = spec.output().to_string();
    let w = f1.var_width(&out).ok_or_else(|| ChainError::NoOutput(spec.stage1.id.clone()))?;

    let vars1 = f1.all_vars();
    let mut taken: BTreeSet<String> = vars1.keys().cloned().chain(f2.all_vars().into_keys()).collect();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for (name, width) in f2.all_vars() {
        let Some(&w1) = vars1.get(&name) else { continue };
        let shared = f1.free_vars().contains_key(&name)
            && f2.free_vars().contains_key(&name)
            && w1 == width
            && name != spec.bridge;
        if !shared {
            let new = fresh(&name, &taken);
            taken.insert(new.clone());
            rename.insert(name, new);
        }
    }
    let map = |t: &BvTerm| {
        t.map_vars(&|n, width| {
            rename
                .get(n)
                .map(|new| BvTerm::defined(new.clone(), width))
        })
    };
    let bridge = rename.get(&spec.bridge).cloned().unwrap_or_else(|| spec.bridge.clone());

    let mut defs: Vec<Definition> = f1.definitions().to_vec();
    defs.push(Definition {
        name: bridge.clone(),
        term: BvTerm::defined(out, w),
    });
    defs.extend(f2.definitions().iter().map(|d| Definition {
        name: rename.get(&d.name).cloned().unwrap_or_else(|| d.name.clone()),
        term: map(&d.term),
    }));
    let prop2 = f2.prop().map_terms(&map);
    let prop = wrapcheck_solver::Prop::all([f1.prop().clone(), prop2]);
    Ok(Composed {
        formula: Formula::with_definitions(defs, prop)?,
        bridge,
    })
}

/// Ordered pairs of encodings from the same file whose stage-1 output
/// width matches a bridgeable stage-2 input, sorted by the two sites.
pub fn enumerate_chains(encodings: &[Encoding]) -> Vec<ChainSpec> {
    let mut out = Vec::new();
    for (i, s1) in encodings.iter().enumerate() {
        let Some(w) = s1.output_width() else { continue };
        for (j, s2) in encodings.iter().enumerate() {
            if i == j || s1.site.file != s2.site.file {
                continue;
            }
            for input in &s2.bridge_inputs {
                if s2.formula.free_vars().get(input).map(|x| x.bits()) != Some(w) {
                    continue;
                }
                if let Ok(spec) = ChainSpec::new(s1.clone(), s2.clone(), input.clone()) {
                    out.push(spec);
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (&a.stage1.site, &a.stage2.site, &a.stage1.id, &a.stage2.id).cmp(&(
            &b.stage1.site,
            &b.stage2.site,
            &b.stage1.id,
            &b.stage2.id,
        ))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainVerdict {
    pub verdict: Verdict,
    pub stage1: Verdict,
    pub stage2: Verdict,
    pub composed: Composed,
    /// Value carried across the bridge in the chain witness.
    pub bridge_value: Option<u64>,
    pub solve_time: Duration,
}

/// Decides the chain and both stages standalone, enforcing that a
/// satisfiable chain implies satisfiable stages and that the witness
/// projects onto a stage-1 witness.
pub fn run_chain(spec: &ChainSpec, opts: &CheckOptions) -> Result<ChainVerdict, ChainError> {
    let composed = compose(spec)?;
    let start = Instant::now();
    let verdict = check(&composed.formula, opts)?.verdict;
    let solve_time = start.elapsed();
    let stage1 = check(&spec.stage1.formula, opts)?.verdict;
    let stage2 = check(&spec.stage2.formula, opts)?.verdict;
    let mut bridge_value = None;
    if let Verdict::Sat(w) = &verdict {
        if matches!(stage1, Verdict::Unsat) {
            return Err(ChainError::Monotonicity(1));
        }
        if matches!(stage2, Verdict::Unsat) {
            return Err(ChainError::Monotonicity(2));
        }
        let projected: BTreeMap<String, u64> = spec
            .stage1
            .formula
            .free_vars()
            .keys()
            .filter_map(|k| w.values.get(k).map(|v| (k.clone(), *v)))
            .collect();
        if !spec.stage1.formula.eval(&projected)? {
            return Err(ChainError::Projection);
        }
        bridge_value = w.derived.get(&composed.bridge).copied();
    }
    Ok(ChainVerdict {
        verdict,
        stage1,
        stage2,
        composed,
        bridge_value,
        solve_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{index_bound, seq_compare_pair, sub_underflow, Cwe, Predicate, ThreatTag};
    use crate::extract::{PatternKind, Severity};
    use crate::frontend::SourceSpan;
    use std::sync::Arc;
    use wrapcheck_solver::{eval_formula, Width};

    fn enc(id: &str, line: u32, cwe: Cwe, p: Predicate) -> Encoding {
        Encoding {
            id: id.into(),
            kind: PatternKind::IndexBound,
            form: None,
            cwe,
            threat_tag: ThreatTag::T1,
            severity: Severity::Flagged,
            site: SourceSpan::new(Arc::from("f.c"), line, 1, 1, 0),
            function: "f".into(),
            formula: p.formula,
            output_var: p.output_var,
            bridge_inputs: p.bridge_inputs,
            description: p.description,
        }
    }

    fn v(n: &str, w: Width) -> BvTerm {
        BvTerm::var(n, w)
    }

    fn sack() -> Encoding {
        let p = seq_compare_pair(
            &v("sack_start", Width::W32),
            &v("rcv_nxt", Width::W32),
            &v("snd_una", Width::W32),
        )
        .unwrap();
        enc("pair", 1, Cwe::Cwe190, p)
    }

    fn oob(cap: u64) -> Encoding {
        enc("oob", 2, Cwe::Cwe125, index_bound(&v("size_arg", Width::W32), cap).unwrap())
    }

    #[test]
    fn sack_to_oob_chain() {
        let spec = ChainSpec::new(sack(), oob(4096), "size_arg").unwrap();
        assert_eq!(spec.label, "CWE-190\u{2192}CWE-125");
        let r = run_chain(&spec, &CheckOptions::default()).unwrap();
        assert!(r.verdict.is_sat());
        assert!(r.bridge_value.unwrap() > 4096);
        let f = &r.composed.formula;
        let mut w: BTreeMap<String, u64> = [("sack_start", 0x91de51f1u64), ("rcv_nxt", 0xc3582921)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        w.insert("snd_una".into(), 0x91de51f1u64.wrapping_add(0x8000_0000) & 0xFFFF_FFFF);
        assert!(eval_formula(f, &w).unwrap());
        assert_eq!(f.eval_definitions(&w).unwrap()["size_arg"], 0xce8628d0);
    }

    #[test]
    fn impossible_second_stage() {
        let spec = ChainSpec::new(sack(), oob(0xFFFF_FFFF), "size_arg").unwrap();
        assert!(run_chain(&spec, &CheckOptions::default()).unwrap().verdict.is_unsat());
    }

    #[test]
    fn colliding_names_are_separated() {
        let a = enc(
            "a",
            1,
            Cwe::Cwe191,
            sub_underflow(&v("x", Width::W32), &v("y", Width::W32)).unwrap(),
        );
        // Stage 2 also defines `diff` and shares `x`.
        let b = enc(
            "b",
            2,
            Cwe::Cwe191,
            sub_underflow(&v("x", Width::W32), &v("n", Width::W32)).unwrap(),
        );
        let mut b = b;
        b.bridge_inputs = vec!["n".into()];
        let spec = ChainSpec::new(a, b, "n").unwrap();
        let c = compose(&spec).unwrap();
        assert!(c.formula.definition("diff_1").is_some());
        assert_eq!(c.formula.free_vars().len(), 2);
        assert!(run_chain(&spec, &CheckOptions::default()).unwrap().verdict.is_sat());
    }

    #[test]
    fn enumeration_filters_by_width() {
        let narrow = enc(
            "n16",
            3,
            Cwe::Cwe191,
            sub_underflow(&v("a", Width::W16), &v("b", Width::W16)).unwrap(),
        );
        let specs = enumerate_chains(&[sack(), oob(4096), narrow]);
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].stage1.id, "pair");

        let mut x = oob(4096);
        x.output_var = Some("size_arg".into());
        let mut y = enc("y", 4, Cwe::Cwe125, index_bound(&v("k", Width::W32), 10).unwrap());
        y.output_var = Some("k".into());
        assert_eq!(enumerate_chains(&[x, y]).len(), 2);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let narrow = enc(
            "n16",
            3,
            Cwe::Cwe191,
            sub_underflow(&v("a", Width::W16), &v("b", Width::W16)).unwrap(),
        );
        assert!(matches!(
            ChainSpec::new(narrow, oob(4096), "size_arg"),
            Err(ChainError::WidthMismatch { .. })
        ));
    }
}
