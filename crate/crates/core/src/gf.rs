//! Finite fields GF(p^m) with table-driven arithmetic.
//!
//! Elements are encoded as integers in `[0, q)` whose base-`p` digits are the
//! coefficients of a polynomial on the basis `{1, x, ..., x^(m-1)}` modulo a
//! fixed monic irreducible polynomial. The encoding `0` is the additive
//! identity and `1` the multiplicative identity, so elements of the prime
//! subfield encode as themselves.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported field size.
pub const MAX_FIELD_SIZE: u64 = 1 << 16;

/// Additive tables are materialized below this size.
const ADD_TABLE_LIMIT: usize = 256;

/// Default moduli for the small non-prime fields. Each entry is validated by
/// the irreducibility test when a field is built from it.
const DEFAULT_MODULI: &[(u32, u32, &[u32])] = &[
    (2, 2, &[1, 1, 1]),
    (2, 3, &[1, 1, 0, 1]),
    (2, 4, &[1, 1, 0, 0, 1]),
    (2, 5, &[1, 0, 1, 0, 0, 1]),
    (2, 6, &[1, 1, 0, 0, 0, 0, 1]),
    (3, 2, &[2, 2, 1]),
    (3, 3, &[1, 2, 0, 1]),
    (5, 2, &[2, 4, 1]),
    (7, 2, &[3, 6, 1]),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElem(pub u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

struct Tables {
    p: u32,
    m: u32,
    q: usize,
    modulus: Vec<u32>,
    alpha: FieldElem,
    /// `exp[k] = alpha^k` for `k < 2(q-1)`, doubled to skip a reduction in `mul`.
    exp: Vec<u32>,
    log: Vec<u32>,
    neg: Vec<u32>,
    trace: Vec<u32>,
    chars: Vec<Complex64>,
    add: Option<Vec<u32>>,
}

/// A concrete finite field GF(p^m). Cheap to clone; the tables are shared.
#[derive(Clone)]
pub struct FieldCtx {
    t: Arc<Tables>,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldCtx({})", self)
    }
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.t, &other.t)
            || (self.t.p == other.t.p && self.t.modulus == other.t.modulus)
    }
}

impl Eq for FieldCtx {}

impl fmt::Display for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}^{}/{}",
            self.t.p,
            self.t.m,
            format_poly(&self.t.modulus)
        )
    }
}

impl FieldCtx {
    /// Builds GF(p^m). Without an explicit modulus, a built-in table covers
    /// every non-prime field with `p^m <= 64`, prime fields use `x`, and
    /// anything else gets the lexicographically smallest monic irreducible
    /// polynomial of degree `m`.
    pub fn new(p: u32, m: u32, modulus: Option<&[u32]>) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(Error::NotPrime(p as u64));
        }
        if m == 0 {
            return Err(Error::UnsupportedSize { p: p as u64, m });
        }
        let q = (p as u64)
            .checked_pow(m)
            .filter(|&q| q <= MAX_FIELD_SIZE)
            .ok_or(Error::UnsupportedSize { p: p as u64, m })? as usize;

        let modulus = match modulus {
            Some(f) => {
                let f = f.to_vec();
                if f.len() != m as usize + 1 || f[m as usize] != 1 {
                    return Err(Error::InvalidModulus(format!(
                        "expected a monic polynomial of degree {m}, got {}",
                        format_poly(&f)
                    )));
                }
                if let Some(&c) = f.iter().find(|&&c| c >= p) {
                    return Err(Error::InvalidModulus(format!(
                        "coefficient {c} is not reduced mod {p}"
                    )));
                }
                if !poly::is_irreducible(&f, p) {
                    return Err(Error::ReduciblePolynomial(format_poly(&f)));
                }
                f
            }
            None => default_modulus(p, m),
        };

        Ok(Self {
            t: Arc::new(build_tables(p, m, q, modulus)),
        })
    }

    /// Prime field GF(p).
    pub fn prime(p: u32) -> Result<Self> {
        Self::new(p, 1, None)
    }

    /// GF(q) for a prime power `q` with the default modulus.
    pub fn of_size(q: u64) -> Result<Self> {
        let (p, m) = prime_power(q).ok_or(Error::BadFieldSpec {
            spec: q.to_string(),
            reason: "not a prime power".into(),
        })?;
        Self::new(p, m, None)
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.t.p
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.t.m
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.t.q
    }

    pub fn modulus(&self) -> &[u32] {
        &self.t.modulus
    }

    /// The fixed primitive element: smallest encoding of multiplicative order `q-1`.
    #[inline]
    pub fn alpha(&self) -> FieldElem {
        self.t.alpha
    }

    pub fn primitive_element(&self) -> FieldElem {
        self.t.alpha
    }

    pub fn elem(&self, v: u32) -> Result<FieldElem> {
        if (v as usize) < self.t.q {
            Ok(FieldElem(v))
        } else {
            Err(Error::BadParameter(format!(
                "{v} is not an element of a field of size {}",
                self.t.q
            )))
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElem> + Clone {
        (0..self.t.q as u32).map(FieldElem)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FieldElem> + Clone {
        (1..self.t.q as u32).map(FieldElem)
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        let t = &*self.t;
        if t.p == 2 {
            return FieldElem(a.0 ^ b.0);
        }
        if let Some(add) = &t.add {
            return FieldElem(add[a.index() * t.q + b.index()]);
        }
        if t.m == 1 {
            return FieldElem((a.0 + b.0) % t.p);
        }
        let (mut x, mut y, mut out, mut place) = (a.0, b.0, 0u32, 1u32);
        for _ in 0..t.m {
            out += ((x % t.p + y % t.p) % t.p) * place;
            x /= t.p;
            y /= t.p;
            place = place.wrapping_mul(t.p);
        }
        FieldElem(out)
    }

    #[inline]
    pub fn neg(&self, a: FieldElem) -> FieldElem {
        FieldElem(self.t.neg[a.index()])
    }

    #[inline]
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a.0 == 0 || b.0 == 0 {
            return FieldElem::ZERO;
        }
        let t = &*self.t;
        FieldElem(t.exp[(t.log[a.index()] + t.log[b.index()]) as usize])
    }

    pub fn inv(&self, a: FieldElem) -> Result<FieldElem> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let t = &*self.t;
        let order = (t.q - 1) as u32;
        Ok(FieldElem(
            t.exp[((order - t.log[a.index()]) % order) as usize],
        ))
    }

    pub fn div(&self, a: FieldElem, b: FieldElem) -> Result<FieldElem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e`, with `0^0 = 1`.
    pub fn pow(&self, a: FieldElem, e: u64) -> FieldElem {
        if e == 0 {
            return FieldElem::ONE;
        }
        if a.is_zero() {
            return FieldElem::ZERO;
        }
        let t = &*self.t;
        let order = (t.q - 1) as u64;
        let k = (t.log[a.index()] as u64 * (e % order)) % order;
        FieldElem(t.exp[k as usize])
    }

    /// `alpha^k` for any integer exponent, negative ones included.
    pub fn alpha_pow(&self, k: i64) -> FieldElem {
        let order = (self.t.q - 1) as i64;
        FieldElem(self.t.exp[k.rem_euclid(order) as usize])
    }

    /// Multiplicative order of a nonzero element.
    pub fn order(&self, a: FieldElem) -> Result<u64> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = (self.t.q - 1) as u64;
        let l = self.t.log[a.index()] as u64;
        Ok(n / gcd(n, l))
    }

    /// Absolute trace onto the prime field, `x + x^p + ... + x^(p^(m-1))`.
    #[inline]
    pub fn trace(&self, x: FieldElem) -> FieldElem {
        FieldElem(self.t.trace[x.index()])
    }

    /// Additive character `exp(2 pi i Tr(x) / p)`; exactly `+-1` when `p = 2`.
    #[inline]
    pub fn character(&self, x: FieldElem) -> Complex64 {
        self.t.chars[x.index()]
    }

    /// `x^(p^k)`.
    pub fn frobenius(&self, x: FieldElem, k: u32) -> FieldElem {
        let mut y = x;
        for _ in 0..k {
            y = self.pow(y, self.t.p as u64);
        }
        y
    }

    pub fn is_prime_field_elem(&self, x: FieldElem) -> bool {
        x.0 < self.t.p
    }

    /// Smallest subfield containing the prime field and every element of `set`.
    pub fn generated_subfield(&self, set: &[FieldElem]) -> Subfield {
        let m = self.t.m;
        let k = (1..=m)
            .filter(|k| m.is_multiple_of(*k))
            .find(|&k| set.iter().all(|&a| self.frobenius(a, k) == a))
            .unwrap_or(m);
        self.subfield_of_degree(k)
    }

    /// The unique subfield of size `p^k`, for `k | m`.
    pub fn subfield_of_degree(&self, k: u32) -> Subfield {
        assert!(
            k >= 1 && self.t.m.is_multiple_of(k),
            "subfield degree must divide m"
        );
        let elems: Vec<FieldElem> = self
            .elements()
            .filter(|&x| self.frobenius(x, k) == x)
            .collect();
        Subfield { degree: k, elems }
    }

    pub fn subfields(&self) -> Vec<Subfield> {
        (1..=self.t.m)
            .filter(|k| self.t.m.is_multiple_of(*k))
            .map(|k| self.subfield_of_degree(k))
            .collect()
    }

    /// Validates an arbitrary element set as a subfield.
    pub fn subfield_from_elements(&self, set: &[FieldElem]) -> Result<Subfield> {
        let mut elems = set.to_vec();
        elems.sort_unstable();
        elems.dedup();
        if let Some(x) = elems.iter().find(|x| x.index() >= self.t.q) {
            return Err(Error::NotASubfield(format!("{x} is outside the field")));
        }
        let size = elems.len() as u64;
        let degree = (1..=self.t.m)
            .find(|&k| (self.t.p as u64).pow(k) == size && self.t.m.is_multiple_of(k))
            .ok_or_else(|| Error::NotASubfield(format!("size {size} is not p^k with k | m")))?;
        let has = |x: FieldElem| elems.binary_search(&x).is_ok();
        if !has(FieldElem::ZERO) || !has(FieldElem::ONE) {
            return Err(Error::NotASubfield("missing 0 or 1".into()));
        }
        for &a in &elems {
            for &b in &elems {
                if !has(self.add(a, b)) || !has(self.mul(a, b)) {
                    return Err(Error::NotASubfield(format!(
                        "not closed for the pair ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Subfield { degree, elems })
    }

    /// Coordinates of the field over `sub` on the basis `{1, alpha, ..., alpha^(M-1)}`.
    pub fn decomposition(&self, sub: &Subfield) -> Result<SubfieldBasis> {
        let sub = self.subfield_from_elements(&sub.elems)?;
        let dim = (self.t.m / sub.degree) as usize;
        let basis: Vec<FieldElem> = (0..dim).map(|i| self.alpha_pow(i as i64)).collect();
        let s = sub.size();
        let mut coords = vec![Vec::new(); self.t.q];
        let mut digits = vec![0usize; dim];
        for _ in 0..self.t.q {
            let c: Vec<FieldElem> = digits.iter().map(|&d| sub.elems[d]).collect();
            let x = c
                .iter()
                .zip(&basis)
                .fold(FieldElem::ZERO, |acc, (&ci, &b)| {
                    self.add(acc, self.mul(ci, b))
                });
            if !coords[x.index()].is_empty() {
                return Err(Error::NotASubfield("basis is not independent".into()));
            }
            coords[x.index()] = c;
            for d in digits.iter_mut() {
                *d += 1;
                if *d < s {
                    break;
                }
                *d = 0;
            }
        }
        Ok(SubfieldBasis {
            field: self.clone(),
            sub,
            basis,
            coords,
        })
    }

    /// Base-`p` digits of an element (polynomial coefficients, low degree first).
    pub fn digits(&self, x: FieldElem) -> Vec<u32> {
        let mut v = x.0;
        (0..self.t.m)
            .map(|_| {
                let d = v % self.t.p;
                v /= self.t.p;
                d
            })
            .collect()
    }

    pub fn from_digits(&self, digits: &[u32]) -> Result<FieldElem> {
        if digits.len() != self.t.m as usize || digits.iter().any(|&d| d >= self.t.p) {
            return Err(Error::BadParameter(format!("bad digit vector {digits:?}")));
        }
        Ok(FieldElem(
            digits.iter().rev().fold(0u32, |acc, &d| acc * self.t.p + d),
        ))
    }
}

/// A subfield of a [`FieldCtx`], held as its sorted element set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subfield {
    degree: u32,
    elems: Vec<FieldElem>,
}

impl Subfield {
    /// `k` such that the subfield has `p^k` elements.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.elems.len()
    }

    pub fn elements(&self) -> &[FieldElem] {
        &self.elems
    }

    pub fn contains(&self, x: FieldElem) -> bool {
        self.elems.binary_search(&x).is_ok()
    }
}

/// Linear isomorphism between GF(q) and `sub^M`.
#[derive(Clone, Debug)]
pub struct SubfieldBasis {
    field: FieldCtx,
    sub: Subfield,
    basis: Vec<FieldElem>,
    coords: Vec<Vec<FieldElem>>,
}

impl SubfieldBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[FieldElem] {
        &self.basis
    }

    pub fn subfield(&self) -> &Subfield {
        &self.sub
    }

    pub fn decompose(&self, x: FieldElem) -> &[FieldElem] {
        &self.coords[x.index()]
    }

    pub fn recompose(&self, coords: &[FieldElem]) -> Result<FieldElem> {
        if coords.len() != self.basis.len() {
            return Err(Error::LengthMismatch {
                expected: self.basis.len(),
                got: coords.len(),
            });
        }
        if let Some(c) = coords.iter().find(|&&c| !self.sub.contains(c)) {
            return Err(Error::NotASubfield(format!("{c} is not in the subfield")));
        }
        let f = &self.field;
        Ok(coords
            .iter()
            .zip(&self.basis)
            .fold(FieldElem::ZERO, |acc, (&c, &b)| f.add(acc, f.mul(c, b))))
    }
}

impl FromStr for FieldCtx {
    type Err = Error;

    /// Parses `p^m`, `p^m/poly` or a bare prime power, e.g. `2^2/1+x+x^2` or `4`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadFieldSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let spec_t = spec.trim();
        let (size, poly) = match spec_t.split_once('/') {
            Some((s, p)) => (s.trim(), Some(p.trim())),
            None => (spec_t, None),
        };
        let (p, m) = match size.split_once('^') {
            Some((p, m)) => (
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| bad("bad characteristic"))?,
                m.trim().parse::<u32>().map_err(|_| bad("bad degree"))?,
            ),
            None => {
                let q = size.parse::<u64>().map_err(|_| bad("bad size"))?;
                let (p, m) = prime_power(q).ok_or_else(|| bad("size is not a prime power"))?;
                (p, m)
            }
        };
        let modulus = match poly {
            Some(text) => Some(parse_poly(text, p).map_err(|e| bad(&e))?),
            None => None,
        };
        FieldCtx::new(p, m, modulus.as_deref())
    }
}

/// Formats a coefficient list (low degree first) as `1+x+x^2`.
pub fn format_poly(coeffs: &[u32]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(k, &c)| match (k, c) {
            (0, c) => c.to_string(),
            (1, 1) => "x".to_string(),
            (1, c) => format!("{c}*x"),
            (k, 1) => format!("x^{k}"),
            (k, c) => format!("{c}*x^{k}"),
        })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join("+")
    }
}

/// Parses `c0+c1*x+x^2`-style polynomials into a coefficient list.
pub fn parse_poly(text: &str, p: u32) -> std::result::Result<Vec<u32>, String> {
    let mut coeffs: Vec<u32> = Vec::new();
    for raw in text.split('+') {
        let term = raw.trim();
        if term.is_empty() {
            return Err("empty term".into());
        }
        let (coef, power) = match term.find('x') {
            None => (term, 0usize),
            Some(pos) => {
                let c = term[..pos].trim_end_matches('*').trim();
                let c = if c.is_empty() { "1" } else { c };
                let rest = term[pos + 1..].trim();
                let k = if rest.is_empty() {
                    1
                } else {
                    rest.strip_prefix('^')
                        .ok_or_else(|| format!("bad term {term:?}"))?
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| format!("bad exponent in {term:?}"))?
                };
                (c, k)
            }
        };
        let c: u32 = coef
            .parse()
            .map_err(|_| format!("bad coefficient in {term:?}"))?;
        if coeffs.len() <= power {
            coeffs.resize(power + 1, 0);
        }
        coeffs[power] = (coeffs[power] + c % p) % p;
    }
    while coeffs.len() > 1 && coeffs.last() == Some(&0) {
        coeffs.pop();
    }
    Ok(coeffs)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits `q = p^m`.
pub fn prime_power(q: u64) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let (mut r, mut m) = (q, 0u32);
    while r % p == 0 {
        r /= p;
        m += 1;
    }
    (r == 1).then_some((p as u32, m))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn default_modulus(p: u32, m: u32) -> Vec<u32> {
    if m == 1 {
        return vec![0, 1];
    }
    if let Some((_, _, f)) = DEFAULT_MODULI
        .iter()
        .find(|(pp, mm, _)| *pp == p && *mm == m)
    {
        debug_assert!(poly::is_irreducible(f, p));
        return f.to_vec();
    }
    // lexicographically smallest monic irreducible polynomial
    let count = (p as u64).pow(m);
    (0..count)
        .map(|v| {
            let mut f: Vec<u32> = (0..m)
                .scan(v, |r, _| {
                    let d = (*r % p as u64) as u32;
                    *r /= p as u64;
                    Some(d)
                })
                .collect();
            f.push(1);
            f
        })
        .find(|f| poly::is_irreducible(f, p))
        .expect("an irreducible polynomial exists for every degree")
}

fn build_tables(p: u32, m: u32, q: usize, modulus: Vec<u32>) -> Tables {
    let to_digits = |v: usize| -> Vec<u32> {
        let mut v = v as u32;
        (0..m)
            .map(|_| {
                let d = v % p;
                v /= p;
                d
            })
            .collect()
    };
    let from_digits = |d: &[u32]| -> u32 { d.iter().rev().fold(0u32, |acc, &c| acc * p + c) };
    let mulmod = |a: &[u32], b: &[u32]| -> Vec<u32> {
        let mut r = poly::mulmod(a, b, &modulus, p);
        r.resize(m as usize, 0);
        r
    };

    let order = (q - 1) as u64;
    let factors = prime_factors(order);
    let powmod = |g: &[u32], e: u64| -> Vec<u32> {
        let mut r = poly::powmod(g, e, &modulus, p);
        r.resize(m as usize, 0);
        r
    };
    let one = to_digits(1);
    let alpha = if q == 2 {
        1usize
    } else {
        (2..q)
            .find(|&g| {
                let gd = to_digits(g);
                factors.iter().all(|&r| powmod(&gd, order / r) != one)
            })
            .expect("the multiplicative group is cyclic")
    };

    let mut exp = vec![0u32; 2 * (q - 1)];
    let mut log = vec![0u32; q];
    let ad = to_digits(alpha);
    let mut cur = one.clone();
    for k in 0..q - 1 {
        let v = from_digits(&cur);
        exp[k] = v;
        exp[k + q - 1] = v;
        log[v as usize] = k as u32;
        cur = mulmod(&cur, &ad);
    }

    let neg: Vec<u32> = (0..q)
        .map(|v| {
            let d: Vec<u32> = to_digits(v).iter().map(|&c| (p - c) % p).collect();
            from_digits(&d)
        })
        .collect();

    let add = (p != 2 && m > 1 && q <= ADD_TABLE_LIMIT).then(|| {
        let mut t = vec![0u32; q * q];
        for a in 0..q {
            let da = to_digits(a);
            for b in 0..q {
                let db = to_digits(b);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                t[a * q + b] = from_digits(&s);
            }
        }
        t
    });

    let pow_elem = |a: u32, e: u64| -> u32 {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        let k = (log[a as usize] as u64 * (e % order)) % order;
        exp[k as usize]
    };
    let trace: Vec<u32> = (0..q as u32)
        .map(|x| {
            let mut acc = vec![0u32; m as usize];
            let mut e = 1u64;
            for _ in 0..m {
                let y = to_digits(pow_elem(x, e) as usize);
                for (a, b) in acc.iter_mut().zip(&y) {
                    *a = (*a + b) % p;
                }
                e *= p as u64;
            }
            let t = from_digits(&acc);
            debug_assert!(t < p, "trace must land in the prime field");
            t
        })
        .collect();

    let chars = trace
        .iter()
        .map(|&t| match (p, t) {
            (_, 0) => Complex64::new(1.0, 0.0),
            (2, _) => Complex64::new(-1.0, 0.0),
            _ => Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / p as f64),
        })
        .collect();

    Tables {
        p,
        m,
        q,
        modulus,
        alpha: FieldElem(alpha as u32),
        exp,
        log,
        neg,
        trace,
        chars,
        add,
    }
}

/// Dense polynomial arithmetic over a prime field, low degree first.
mod poly {
    fn trim(a: &mut Vec<u32>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    fn inv_mod(a: u32, p: u32) -> u32 {
        let (mut r, mut b, mut e) = (1u64, a as u64 % p as u64, p as u64 - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p as u64;
            }
            b = b * b % p as u64;
            e >>= 1;
        }
        r as u32
    }

    pub fn rem(a: &[u32], f: &[u32], p: u32) -> Vec<u32> {
        let mut r = a.to_vec();
        trim(&mut r);
        let mut f = f.to_vec();
        trim(&mut f);
        let df = f.len() - 1;
        let lead_inv = inv_mod(f[df], p) as u64;
        while r.len() > df {
            let dr = r.len() - 1;
            let c = r[dr] as u64 * lead_inv % p as u64;
            for (k, &fk) in f.iter().enumerate() {
                let idx = dr - df + k;
                let sub = c * fk as u64 % p as u64;
                r[idx] = ((r[idx] as u64 + p as u64 - sub) % p as u64) as u32;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let mut out: Vec<u32> = out.into_iter().map(|v| v as u32).collect();
        trim(&mut out);
        out
    }

    pub fn mulmod(a: &[u32], b: &[u32], f: &[u32], p: u32) -> Vec<u32> {
        rem(&mul(a, b, p), f, p)
    }

    pub fn powmod(base: &[u32], mut e: u64, f: &[u32], p: u32) -> Vec<u32> {
        let mut result = rem(&[1], f, p);
        let mut b = rem(base, f, p);
        while e > 0 {
            if e & 1 == 1 {
                result = mulmod(&result, &b, f, p);
            }
            b = mulmod(&b, &b, f, p);
            e >>= 1;
        }
        result
    }

    fn sub(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let n = a.len().max(b.len());
        let mut out: Vec<u32> = (0..n)
            .map(|k| {
                let x = a.get(k).copied().unwrap_or(0);
                let y = b.get(k).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect();
        trim(&mut out);
        out
    }

    fn gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// Rabin's test: `f` of degree `m` is irreducible iff `x^(p^m) = x mod f`
    /// and `gcd(x^(p^(m/r)) - x, f) = 1` for every prime `r | m`.
    pub fn is_irreducible(f: &[u32], p: u32) -> bool {
        let mut f = f.to_vec();
        trim(&mut f);
        if f.len() < 2 {
            return false;
        }
        let m = f.len() - 1;
        if m == 1 {
            return true;
        }
        let x = vec![0u32, 1];
        let mut frob = vec![rem(&x, &f, p)];
        for _ in 0..m {
            let next = powmod(frob.last().unwrap(), p as u64, &f, p);
            frob.push(next);
        }
        if sub(&frob[m], &x, p) != Vec::<u32>::new() {
            return false;
        }
        super::prime_factors(m as u64).into_iter().all(|r| {
            let h = sub(&frob[m / r as usize], &x, p);
            gcd(&h, &f, p).len() == 1
        })
    }
}
