//! Three-strand braid words, their image in SL(2, Z) under the Burau
//! representation at `t = -1`, and Thurston-Nielsen classification.
//!
//! The generator images are
//!
//! ```text
//! σ1 ↦ [[1, 1], [0, 1]]      σ2 ↦ [[1, 0], [-1, 1]]
//! ```
//!
//! A word represents a pseudo-Anosov class exactly when the image has
//! `|trace| > 2`; the dominant eigenvalue magnitude is then the expansion
//! constant λ and `log λ` bounds the topological entropy of every map in the
//! class from below.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::geom::{log, sqrt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BraidError {
    #[error("unrecognised braid token `{0}`")]
    UnknownToken(String),
    #[error("generator index {0} is outside {{1, 2}}")]
    GeneratorOutOfRange(i64),
    #[error("integer overflow while multiplying the image of a word of length {0}")]
    Overflow(usize),
    #[error("braid is not pseudo-Anosov (|trace| = {} <= 2)", .trace.unsigned_abs())]
    NotPseudoAnosov { trace: i64 },
}

/// One Artin generator `σ_i^{±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    generator: u8,
    inverse: bool,
}

impl Letter {
    pub fn new(generator: u8, inverse: bool) -> Result<Self, BraidError> {
        if generator == 1 || generator == 2 {
            Ok(Letter { generator, inverse })
        } else {
            Err(BraidError::GeneratorOutOfRange(generator as i64))
        }
    }

    pub const fn sigma(generator: u8) -> Self {
        assert!(generator == 1 || generator == 2);
        Letter {
            generator,
            inverse: false,
        }
    }

    pub const fn sigma_inv(generator: u8) -> Self {
        assert!(generator == 1 || generator == 2);
        Letter {
            generator,
            inverse: true,
        }
    }

    /// Generator index, 1 or 2.
    pub fn generator(self) -> u8 {
        self.generator
    }

    pub fn is_inverse(self) -> bool {
        self.inverse
    }

    /// `+1` or `-1`.
    pub fn sign(self) -> i8 {
        if self.inverse {
            -1
        } else {
            1
        }
    }

    pub fn inverted(self) -> Self {
        Letter {
            generator: self.generator,
            inverse: !self.inverse,
        }
    }

    /// All four letters, in the order σ1, σ1⁻¹, σ2, σ2⁻¹.
    pub const ALL: [Letter; 4] = [
        Letter {
            generator: 1,
            inverse: false,
        },
        Letter {
            generator: 1,
            inverse: true,
        },
        Letter {
            generator: 2,
            inverse: false,
        },
        Letter {
            generator: 2,
            inverse: true,
        },
    ];
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "-{}", self.generator)
        } else {
            write!(f, "{}", self.generator)
        }
    }
}

/// A word in the generators of B₃. Letters are kept exactly as given; use
/// [`BraidWord::reduced`] for the freely reduced form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BraidWord {
    letters: Vec<Letter>,
}

impl BraidWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        BraidWord { letters }
    }

    pub fn empty() -> Self {
        BraidWord::default()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn push(&mut self, letter: Letter) {
        self.letters.push(letter);
    }

    /// Cancels adjacent `σ_i σ_i⁻¹` pairs until none remain.
    pub fn reduced(&self) -> BraidWord {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&l.inverted()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        BraidWord { letters: out }
    }

    pub fn inverse(&self) -> BraidWord {
        BraidWord {
            letters: self.letters.iter().rev().map(|l| l.inverted()).collect(),
        }
    }

    pub fn concat(&self, other: &BraidWord) -> BraidWord {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        BraidWord { letters }
    }

    /// The word repeated `n` times.
    pub fn power(&self, n: usize) -> BraidWord {
        let mut letters = Vec::with_capacity(self.letters.len() * n);
        for _ in 0..n {
            letters.extend_from_slice(&self.letters);
        }
        BraidWord { letters }
    }

    /// Every word of exactly `len` letters, in lexicographic order of
    /// [`Letter::ALL`].
    pub fn all_of_length(len: usize) -> Vec<BraidWord> {
        let mut words = alloc::vec![BraidWord::empty()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(words.len() * 4);
            for w in &words {
                for l in Letter::ALL {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
            words = next;
        }
        words
    }
}

impl From<Vec<Letter>> for BraidWord {
    fn from(letters: Vec<Letter>) -> Self {
        BraidWord { letters }
    }
}

/// Signed-integer form, e.g. `1 -2 1`; the empty word prints as `e`.
impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for BraidWord {
    type Err = BraidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_braid(s)
    }
}

/// Parses a braid word.
///
/// Tokens are separated by whitespace or commas. A token is either a signed
/// generator index (`1`, `-2`, `+1`) or a run of letters where `a`/`b` stand
/// for σ1/σ2 and `A`/`B` for their inverses. `e` alone denotes the empty word.
pub fn parse_braid(text: &str) -> Result<BraidWord, BraidError> {
    let mut letters = Vec::new();
    for token in text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
    {
        if token == "e" {
            continue;
        }
        if let Ok(n) = token.parse::<i64>() {
            let generator = n.unsigned_abs();
            if generator != 1 && generator != 2 {
                return Err(BraidError::GeneratorOutOfRange(n));
            }
            letters.push(Letter {
                generator: generator as u8,
                inverse: n < 0,
            });
            continue;
        }
        if !token.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(BraidError::UnknownToken(token.into()));
        }
        for c in token.chars() {
            let letter = match c {
                'a' => Letter::sigma(1),
                'A' => Letter::sigma_inv(1),
                'b' => Letter::sigma(2),
                'B' => Letter::sigma_inv(2),
                _ => return Err(BraidError::UnknownToken(token.into())),
            };
            letters.push(letter);
        }
    }
    Ok(BraidWord { letters })
}

/// Exact integer 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntMatrix2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix2 {
    pub const IDENTITY: IntMatrix2 = IntMatrix2 {
        a: 1,
        b: 0,
        c: 0,
        d: 1,
    };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        IntMatrix2 { a, b, c, d }
    }

    pub fn checked_mul(&self, o: &IntMatrix2) -> Option<IntMatrix2> {
        let dot = |p: i64, q: i64, r: i64, s: i64| p.checked_mul(q)?.checked_add(r.checked_mul(s)?);
        Some(IntMatrix2 {
            a: dot(self.a, o.a, self.b, o.c)?,
            b: dot(self.a, o.b, self.b, o.d)?,
            c: dot(self.c, o.a, self.d, o.c)?,
            d: dot(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn det(&self) -> Option<i64> {
        self.a
            .checked_mul(self.d)?
            .checked_sub(self.b.checked_mul(self.c)?)
    }

    pub fn trace(&self) -> Option<i64> {
        self.a.checked_add(self.d)
    }

    /// Inverse of a determinant-one matrix.
    pub fn sl2_inverse(&self) -> IntMatrix2 {
        IntMatrix2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn neg(&self) -> IntMatrix2 {
        IntMatrix2 {
            a: -self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }
}

impl fmt::Display for IntMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Image of a single letter.
pub fn letter_image(l: Letter) -> IntMatrix2 {
    match (l.generator, l.inverse) {
        (1, false) => IntMatrix2::new(1, 1, 0, 1),
        (1, true) => IntMatrix2::new(1, -1, 0, 1),
        (2, false) => IntMatrix2::new(1, 0, -1, 1),
        (2, true) => IntMatrix2::new(1, 0, 1, 1),
        _ => unreachable!("letters are validated on construction"),
    }
}

/// Product of the letter images in word order.
pub fn burau_at_minus_one(word: &BraidWord) -> Result<IntMatrix2, BraidError> {
    word.letters
        .iter()
        .try_fold(IntMatrix2::IDENTITY, |acc, &l| {
            acc.checked_mul(&letter_image(l))
                .ok_or(BraidError::Overflow(word.len()))
        })
}

/// Thurston-Nielsen type as licensed by the trace criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TnClass {
    PseudoAnosov {
        trace: i64,
        expansion: f64,
    },
    FiniteOrder {
        trace: i64,
    },
    /// `|trace| = 2`. `identity` flags the case where the image is exactly
    /// the identity matrix.
    Parabolic {
        trace: i64,
        identity: bool,
    },
}

impl TnClass {
    pub fn trace(&self) -> i64 {
        match *self {
            TnClass::PseudoAnosov { trace, .. }
            | TnClass::FiniteOrder { trace }
            | TnClass::Parabolic { trace, .. } => trace,
        }
    }

    pub fn is_pseudo_anosov(&self) -> bool {
        matches!(self, TnClass::PseudoAnosov { .. })
    }

    pub fn expansion(&self) -> Option<f64> {
        match *self {
            TnClass::PseudoAnosov { expansion, .. } => Some(expansion),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TnClass::PseudoAnosov { .. } => "pseudo-Anosov",
            TnClass::FiniteOrder { .. } => "finite-order",
            TnClass::Parabolic { .. } => "parabolic",
        }
    }
}

/// Dominant eigenvalue magnitude of a determinant-one matrix with the given
/// trace, `(|t| + sqrt(t² − 4)) / 2`, for `|t| > 2`.
pub fn expansion_from_trace(trace: i64) -> Option<f64> {
    if trace.unsigned_abs() <= 2 {
        return None;
    }
    let t = trace.unsigned_abs() as f64;
    Some(0.5 * (t + sqrt(t * t - 4.0)))
}

pub fn classify_matrix(m: &IntMatrix2) -> Result<TnClass, BraidError> {
    let trace = m.trace().ok_or(BraidError::Overflow(0))?;
    Ok(match trace.unsigned_abs() {
        0 | 1 => TnClass::FiniteOrder { trace },
        2 => TnClass::Parabolic {
            trace,
            identity: *m == IntMatrix2::IDENTITY,
        },
        _ => TnClass::PseudoAnosov {
            trace,
            expansion: expansion_from_trace(trace).unwrap(),
        },
    })
}

pub fn classify(word: &BraidWord) -> Result<TnClass, BraidError> {
    classify_matrix(&burau_at_minus_one(word)?)
}

/// `log λ` in nats per period.
pub fn entropy_lower_bound(word: &BraidWord) -> Result<f64, BraidError> {
    match classify(word)? {
        TnClass::PseudoAnosov { expansion, .. } => Ok(log(expansion)),
        other => Err(BraidError::NotPseudoAnosov {
            trace: other.trace(),
        }),
    }
}

/// Everything the `classify` command reports about a word.
#[derive(Debug, Clone, PartialEq)]
pub struct BraidReport {
    pub reduced: BraidWord,
    pub matrix: IntMatrix2,
    pub class: TnClass,
    pub entropy_bound: Option<f64>,
}

pub fn report(word: &BraidWord) -> Result<BraidReport, BraidError> {
    let matrix = burau_at_minus_one(word)?;
    let class = classify_matrix(&matrix)?;
    Ok(BraidReport {
        reduced: word.reduced(),
        matrix,
        class,
        entropy_bound: class.expansion().map(log),
    })
}
