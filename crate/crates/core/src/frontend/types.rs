use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Fixed-width machine integer. Width 1 is the boolean type and is always unsigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntType {
    pub width: u8,
    pub signed: bool,
}

impl IntType {
    pub const BOOL: IntType = IntType { width: 1, signed: false };
    pub const I8: IntType = IntType { width: 8, signed: true };
    pub const U8: IntType = IntType { width: 8, signed: false };
    pub const I16: IntType = IntType { width: 16, signed: true };
    pub const U16: IntType = IntType { width: 16, signed: false };
    pub const I32: IntType = IntType { width: 32, signed: true };
    pub const U32: IntType = IntType { width: 32, signed: false };
    pub const I64: IntType = IntType { width: 64, signed: true };
    pub const U64: IntType = IntType { width: 64, signed: false };

    pub const ALL: [IntType; 9] = [
        Self::BOOL,
        Self::I8,
        Self::U8,
        Self::I16,
        Self::U16,
        Self::I32,
        Self::U32,
        Self::I64,
        Self::U64,
    ];

    pub fn new(width: u8, signed: bool) -> Option<IntType> {
        let t = IntType { width, signed };
        Self::ALL.contains(&t).then_some(t)
    }

    pub fn is_bool(self) -> bool {
        self.width == 1
    }

    pub fn mask(self) -> u64 {
        if self.width >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// Integer promotion: everything narrower than `int` becomes `int`.
    pub fn promoted(self) -> IntType {
        if self.width < 32 {
            Self::I32
        } else {
            self
        }
    }

    /// The common type of a binary arithmetic operation after promotion.
    pub fn usual_arithmetic(a: IntType, b: IntType) -> IntType {
        let (a, b) = (a.promoted(), b.promoted());
        if a == b {
            return a;
        }
        if a.signed == b.signed {
            return if a.width >= b.width { a } else { b };
        }
        let (s, u) = if a.signed { (a, b) } else { (b, a) };
        if u.width >= s.width {
            u
        } else {
            // signed type is strictly wider and holds every unsigned value
            s
        }
    }

    pub fn min_signed(self) -> i128 {
        if self.signed {
            -(1i128 << (self.width - 1))
        } else {
            0
        }
    }

    pub fn max_value(self) -> i128 {
        if self.signed {
            (1i128 << (self.width - 1)) - 1
        } else {
            (1i128 << self.width) - 1
        }
    }

    /// Interpret `bits` (masked to this width) as a mathematical integer.
    pub fn to_i128(self, bits: u64) -> i128 {
        let bits = bits & self.mask();
        if self.signed && self.width < 64 && (bits >> (self.width - 1)) & 1 == 1 {
            bits as i128 - (1i128 << self.width)
        } else if self.signed && self.width == 64 {
            bits as i64 as i128
        } else {
            bits as i128
        }
    }

    /// Two's-complement bits of `v` truncated to this width.
    pub fn from_i128(self, v: i128) -> u64 {
        (v as u64) & self.mask()
    }

    pub fn fits(self, v: i128) -> bool {
        v >= self.min_signed() && v <= self.max_value()
    }

    /// Name of the nondet intrinsic that produces this type.
    pub fn nondet_suffix(self) -> &'static str {
        match (self.width, self.signed) {
            (1, _) => "bool",
            (8, true) => "char",
            (8, false) => "uchar",
            (16, true) => "short",
            (16, false) => "ushort",
            (32, true) => "int",
            (32, false) => "uint",
            (64, true) => "long",
            _ => "ulong",
        }
    }

    pub fn from_nondet_suffix(s: &str) -> Option<IntType> {
        Some(match s {
            "bool" => Self::BOOL,
            "char" => Self::I8,
            "uchar" => Self::U8,
            "short" => Self::I16,
            "ushort" => Self::U16,
            "int" => Self::I32,
            "uint" | "unsigned" => Self::U32,
            "long" | "longlong" => Self::I64,
            "ulong" | "ulonglong" => Self::U64,
            _ => return None,
        })
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.width, self.signed) {
            (1, _) => "_Bool",
            (8, true) => "char",
            (8, false) => "unsigned char",
            (16, true) => "short",
            (16, false) => "unsigned short",
            (32, true) => "int",
            (32, false) => "unsigned int",
            (64, true) => "long long",
            _ => "unsigned long long",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown integer type `{0}`")]
pub struct UnknownType(String);

impl FromStr for IntType {
    type Err = UnknownType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        parse_type_words(&words).ok_or_else(|| UnknownType(s.to_string()))
    }
}

/// Resolve a C type-specifier word list (`unsigned long long`, `signed char`, ...).
pub(crate) fn parse_type_words(words: &[&str]) -> Option<IntType> {
    let (mut signed, mut longs, mut ints, mut chars, mut shorts, mut bools) = (None, 0, 0, 0, 0, 0);
    for w in words {
        match *w {
            "signed" | "unsigned" => {
                if signed.is_some() {
                    return None;
                }
                signed = Some(*w == "signed");
            }
            "long" => longs += 1,
            "int" => ints += 1,
            "char" => chars += 1,
            "short" => shorts += 1,
            "_Bool" | "bool" => bools += 1,
            _ => return None,
        }
    }
    let s = signed.unwrap_or(true);
    match (bools, chars, shorts, longs, ints) {
        (1, 0, 0, 0, 0) if signed.is_none() => Some(IntType::BOOL),
        (0, 1, 0, 0, 0) => IntType::new(8, s),
        (0, 0, 1, 0, 0 | 1) => IntType::new(16, s),
        (0, 0, 0, 1 | 2, 0 | 1) => IntType::new(64, s),
        (0, 0, 0, 0, 1) => IntType::new(32, s),
        (0, 0, 0, 0, 0) if signed.is_some() => IntType::new(32, s),
        _ => None,
    }
}

impl Serialize for IntType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IntType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_words() {
        assert_eq!("unsigned char".parse::<IntType>().unwrap(), IntType::U8);
        assert_eq!("long long".parse::<IntType>().unwrap(), IntType::I64);
        assert_eq!("unsigned long long int".parse::<IntType>().unwrap(), IntType::U64);
        assert_eq!("long".parse::<IntType>().unwrap(), IntType::I64);
        assert_eq!("unsigned".parse::<IntType>().unwrap(), IntType::U32);
        assert_eq!("_Bool".parse::<IntType>().unwrap(), IntType::BOOL);
        assert!("float".parse::<IntType>().is_err());
        assert!("signed _Bool".parse::<IntType>().is_err());
        for t in IntType::ALL {
            assert_eq!(t.to_string().parse::<IntType>().unwrap(), t);
        }
    }

    #[test]
    fn arithmetic_conversions() {
        use IntType as T;
        assert_eq!(T::usual_arithmetic(T::U8, T::U8), T::I32);
        assert_eq!(T::usual_arithmetic(T::I32, T::U32), T::U32);
        assert_eq!(T::usual_arithmetic(T::I64, T::U32), T::I64);
        assert_eq!(T::usual_arithmetic(T::U64, T::I32), T::U64);
        assert_eq!(T::usual_arithmetic(T::I64, T::U64), T::U64);
        assert_eq!(T::usual_arithmetic(T::BOOL, T::I16), T::I32);
    }

    #[test]
    fn value_views() {
        assert_eq!(IntType::I8.to_i128(0xff), -1);
        assert_eq!(IntType::U8.to_i128(0xff), 255);
        assert_eq!(IntType::I64.to_i128(u64::MAX), -1);
        assert_eq!(IntType::I32.from_i128(-1), 0xffff_ffff);
        assert!(IntType::U8.fits(255) && !IntType::U8.fits(256));
    }
}
