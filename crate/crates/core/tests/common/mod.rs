//! Shared fixtures and exact oracles for the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// `T_n` for `n = 1..=24` at `p = 1/2`, as tabulated for the fair split.
pub const FAIR_THROUGHPUT: [f64; 24] = [
    1.0,
    1.0,
    0.9,
    0.923076923076923,
    0.925925925925926,
    0.925066312997347,
    0.924265779652766,
    0.923974676944973,
    0.923987859755998,
    0.924097597470287,
    0.924195897551348,
    0.924249260650131,
    0.924261232226415,
    0.924247458760778,
    0.924223328101189,
    0.924199576601167,
    0.92418189969132,
    0.924172115344972,
    0.924169623889469,
    0.924172637781192,
    0.924179037207664,
    0.924186877927958,
    0.924194635376452,
    0.924201273691125,
];

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// `L_0 ..= L_{n_max}` by the conditioning recursion in exact arithmetic.
pub fn exact_recursion(p: &BigRational, n_max: usize) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    let mut l = vec![BigRational::one(), BigRational::one(), ratio(2, 1)];
    for n in 3..=n_max {
        let mut acc = BigRational::zero();
        for i in 1..n {
            let w = BigRational::from_integer(binomial(n, i)) * pow(p, i) * pow(&q, n - i);
            acc += w * (&l[i] + &l[n - i]);
        }
        let edge = pow(p, n) + pow(&q, n);
        acc += &edge;
        l.push(acc / (BigRational::one() - edge));
    }
    l.truncate(n_max + 1);
    l
}

/// `L_n` by the alternating binomial sum in exact arithmetic.
pub fn exact_closed(p: &BigRational, n: usize) -> BigRational {
    let q = BigRational::one() - p;
    let r = ratio(2, 1) * p * &q - BigRational::one();
    let mut sum = BigRational::one();
    for i in 2..=n {
        let fi = BigRational::from_integer(BigInt::from(i));
        let numer = &fi - BigRational::one() + &r * &fi * (&fi - BigRational::one()) / ratio(2, 1);
        let denom = BigRational::one() - pow(p, i) - pow(&q, i);
        let term = BigRational::from_integer(binomial(n, i)) * numer / denom;
        if i % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
    }
    sum
}

pub fn to_f64(x: &BigRational) -> f64 {
    // scale to keep the integer division well inside f64 range
    let scale = BigInt::from(10u64).pow(30);
    let scaled = (x.numer() * &scale) / x.denom();
    scaled.to_string().parse::<f64>().expect("decimal integer") / 1e30
}
