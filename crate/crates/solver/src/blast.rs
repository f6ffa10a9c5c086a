//! Tseitin bit-blasting of bitvector formulas to CNF.
//!
//! Every term becomes a vector of literals, least significant bit first.
//! Literal 1 is the constant TRUE (forced by a unit clause); gates over
//! constants fold away and AND/XOR gates are structurally hashed.

use std::collections::{BTreeMap, HashMap};

use crate::bv::{BinOp, BvAtom, BvError, BvTerm, Formula, Prop, Relation};

const TRUE: i32 = 1;
const FALSE: i32 = -1;

/// A CNF instance in DIMACS numbering plus the bits of each free variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
    /// Literals of each free variable, least significant bit first.
    pub var_bits: BTreeMap<String, Vec<i32>>,
}

impl Cnf {
    /// SAT variable backing bit `bit` of free variable `name`.
    pub fn bit_var(&self, name: &str, bit: u32) -> Option<i32> {
        self.var_bits.get(name)?.get(bit as usize).copied()
    }

    /// Reads free-variable values out of a model indexed by DIMACS variable.
    pub fn decode(&self, model: &[bool]) -> BTreeMap<String, u64> {
        self.var_bits
            .iter()
            .map(|(name, bits)| {
                let v = bits.iter().enumerate().fold(0u64, |acc, (i, &l)| {
                    let b = model[l.unsigned_abs() as usize] == (l > 0);
                    acc | (u64::from(b) << i)
                });
                (name.clone(), v)
            })
            .collect()
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

struct Blaster {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    and_cache: HashMap<(i32, i32), i32>,
    xor_cache: HashMap<(i32, i32), i32>,
    env: HashMap<String, Vec<i32>>,
}

impl Blaster {
    fn new() -> Self {
        Blaster {
            num_vars: 1,
            clauses: vec![vec![TRUE]],
            and_cache: HashMap::new(),
            xor_cache: HashMap::new(),
            env: HashMap::new(),
        }
    }

    fn fresh(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    fn and2(&mut self, a: i32, b: i32) -> i32 {
        if a == FALSE || b == FALSE || a == -b {
            return FALSE;
        }
        if a == TRUE || a == b {
            return b;
        }
        if b == TRUE {
            return a;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&o) = self.and_cache.get(&key) {
            return o;
        }
        let o = self.fresh();
        self.clauses.push(vec![-o, a]);
        self.clauses.push(vec![-o, b]);
        self.clauses.push(vec![o, -a, -b]);
        self.and_cache.insert(key, o);
        o
    }

    fn or2(&mut self, a: i32, b: i32) -> i32 {
        -self.and2(-a, -b)
    }

    fn xor2(&mut self, a: i32, b: i32) -> i32 {
        if a == b {
            return FALSE;
        }
        if a == -b {
            return TRUE;
        }
        // Pull negations out so that hashing sees positive operands.
        let negate = (a < 0) != (b < 0);
        let (x, y) = (a.abs(), b.abs());
        let key = if x < y { (x, y) } else { (y, x) };
        let out = if key.0 == TRUE {
            // xor(TRUE, y) = -y
            -key.1
        } else if let Some(&o) = self.xor_cache.get(&key) {
            o
        } else {
            let o = self.fresh();
            let (x, y) = key;
            self.clauses.push(vec![-o, x, y]);
            self.clauses.push(vec![-o, -x, -y]);
            self.clauses.push(vec![o, -x, y]);
            self.clauses.push(vec![o, x, -y]);
            self.xor_cache.insert(key, o);
            o
        };
        if negate {
            -out
        } else {
            out
        }
    }

    fn mux(&mut self, s: i32, then: i32, els: i32) -> i32 {
        if s == TRUE || then == els {
            return then;
        }
        if s == FALSE {
            return els;
        }
        let t = self.and2(s, then);
        let e = self.and2(-s, els);
        self.or2(t, e)
    }

    fn and_all(&mut self, lits: impl IntoIterator<Item = i32>) -> i32 {
        lits.into_iter().fold(TRUE, |acc, l| self.and2(acc, l))
    }

    fn or_all(&mut self, lits: impl IntoIterator<Item = i32>) -> i32 {
        lits.into_iter().fold(FALSE, |acc, l| self.or2(acc, l))
    }

    fn constant(value: u64, width: u32) -> Vec<i32> {
        (0..width)
            .map(|i| if value >> i & 1 == 1 { TRUE } else { FALSE })
            .collect()
    }

    fn adder(&mut self, a: &[i32], b: &[i32], carry_in: i32) -> Vec<i32> {
        let mut carry = carry_in;
        let mut out = Vec::with_capacity(a.len());
        for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
            let t = self.xor2(x, y);
            out.push(self.xor2(t, carry));
            if i + 1 < a.len() {
                let g = self.and2(x, y);
                let p = self.and2(t, carry);
                carry = self.or2(g, p);
            }
        }
        out
    }

    fn multiplier(&mut self, a: &[i32], b: &[i32]) -> Vec<i32> {
        let w = a.len();
        // Put the operand with more constant bits in the multiplier role.
        let consts = |v: &[i32]| v.iter().filter(|l| l.abs() == TRUE).count();
        let (a, b) = if consts(a) > consts(b) { (b, a) } else { (a, b) };
        let mut acc = vec![FALSE; w];
        for (i, &bi) in b.iter().enumerate() {
            if bi == FALSE {
                continue;
            }
            let mut partial = vec![FALSE; w];
            for j in 0..w - i {
                partial[i + j] = self.and2(a[j], bi);
            }
            let upper = self.adder(&acc[i..], &partial[i..], FALSE);
            acc[i..].copy_from_slice(&upper);
        }
        acc
    }

    fn shifter(&mut self, op: BinOp, a: &[i32], b: &[i32]) -> Vec<i32> {
        let w = a.len();
        let fill = match op {
            BinOp::AShr => a[w - 1],
            _ => FALSE,
        };
        let mut cur = a.to_vec();
        let mut overflow = Vec::new();
        for (k, &bk) in b.iter().enumerate() {
            let amount = 1u64.checked_shl(k as u32).unwrap_or(u64::MAX);
            if amount >= w as u64 {
                overflow.push(bk);
                continue;
            }
            let amount = amount as usize;
            let shifted: Vec<i32> = (0..w)
                .map(|i| match op {
                    BinOp::Shl => {
                        if i >= amount {
                            cur[i - amount]
                        } else {
                            FALSE
                        }
                    }
                    _ => {
                        if i + amount < w {
                            cur[i + amount]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
            cur = (0..w).map(|i| self.mux(bk, shifted[i], cur[i])).collect();
        }
        let ov = self.or_all(overflow);
        cur.into_iter().map(|l| self.mux(ov, fill, l)).collect()
    }

    fn term(&mut self, t: &BvTerm) -> Vec<i32> {
        match t {
            BvTerm::Const { value, width } => Self::constant(*value, *width),
            BvTerm::Var { name, .. } => self
                .env
                .get(name)
                .cloned()
                .expect("formula variables are bound before blasting"),
            BvTerm::Binary { op, lhs, rhs } => {
                let a = self.term(lhs);
                let b = self.term(rhs);
                match op {
                    BinOp::Add => self.adder(&a, &b, FALSE),
                    BinOp::Sub => {
                        let nb: Vec<i32> = b.iter().map(|l| -l).collect();
                        self.adder(&a, &nb, TRUE)
                    }
                    BinOp::Mul => self.multiplier(&a, &b),
                    BinOp::Shl | BinOp::LShr | BinOp::AShr => self.shifter(*op, &a, &b),
                    BinOp::And => a.iter().zip(&b).map(|(&x, &y)| self.and2(x, y)).collect(),
                    BinOp::Or => a.iter().zip(&b).map(|(&x, &y)| self.or2(x, y)).collect(),
                }
            }
            BvTerm::Not(a) => self.term(a).into_iter().map(|l| -l).collect(),
            BvTerm::ZeroExt { extra, arg } => {
                let mut v = self.term(arg);
                v.extend(std::iter::repeat(FALSE).take(*extra as usize));
                v
            }
            BvTerm::SignExt { extra, arg } => {
                let mut v = self.term(arg);
                let msb = *v.last().expect("width >= 1");
                v.extend(std::iter::repeat(msb).take(*extra as usize));
                v
            }
            BvTerm::Extract { hi, lo, arg } => {
                let v = self.term(arg);
                v[*lo as usize..=*hi as usize].to_vec()
            }
        }
    }

    fn ult(&mut self, a: &[i32], b: &[i32]) -> i32 {
        let mut lt = FALSE;
        for (&x, &y) in a.iter().zip(b) {
            let differ = self.xor2(x, y);
            lt = self.mux(differ, y, lt);
        }
        lt
    }

    fn atom(&mut self, atom: &BvAtom) -> i32 {
        let a = self.term(&atom.lhs);
        let b = self.term(&atom.rhs);
        match atom.relation {
            Relation::Eq | Relation::Ne => {
                let eqs: Vec<i32> = a.iter().zip(&b).map(|(&x, &y)| -self.xor2(x, y)).collect();
                let e = self.and_all(eqs);
                if atom.relation == Relation::Eq {
                    e
                } else {
                    -e
                }
            }
            Relation::Ult => self.ult(&a, &b),
            Relation::Ugt => self.ult(&b, &a),
            Relation::Ule => -self.ult(&b, &a),
            Relation::Uge => -self.ult(&a, &b),
        }
    }

    fn prop(&mut self, p: &Prop) -> i32 {
        match p {
            Prop::Atom(a) => self.atom(a),
            Prop::And(ps) => {
                let lits: Vec<i32> = ps.iter().map(|q| self.prop(q)).collect();
                self.and_all(lits)
            }
            Prop::Or(ps) => {
                let lits: Vec<i32> = ps.iter().map(|q| self.prop(q)).collect();
                self.or_all(lits)
            }
            Prop::Not(q) => -self.prop(q),
        }
    }
}

/// Translates `f` into an equisatisfiable CNF. Bits of every free
/// variable are allocated up front in name order, so variable numbering
/// depends only on the formula.
pub fn bit_blast(f: &Formula) -> Result<Cnf, BvError> {
    let mut b = Blaster::new();
    let mut var_bits = BTreeMap::new();
    for (name, w) in f.free_vars() {
        let bits: Vec<i32> = (0..w.bits()).map(|_| b.fresh()).collect();
        b.env.insert(name.clone(), bits.clone());
        var_bits.insert(name.clone(), bits);
    }
    for d in f.definitions() {
        let bits = b.term(&d.term);
        b.env.insert(d.name.clone(), bits);
    }
    let root = b.prop(f.prop());
    match root {
        TRUE => {}
        FALSE => b.clauses.push(Vec::new()),
        r => b.clauses.push(vec![r]),
    }
    Ok(Cnf {
        num_vars: b.num_vars,
        clauses: b.clauses,
        var_bits,
    })
}
