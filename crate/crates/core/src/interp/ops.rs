//! Value-level operator semantics, computed over mathematical integers and
//! wrapped back to the operand width.

use crate::frontend::{BinOp, IntType, UnOp};

/// Convert `v` from one integer type to another (C conversion rules).
pub fn convert(v: u64, from: IntType, to: IntType) -> u64 {
    if to.is_bool() {
        return (v & from.mask() != 0) as u64;
    }
    to.from_i128(from.to_i128(v))
}

/// Apply a binary operator at operand type `ty`. Comparisons and logical
/// operators yield 0/1. `None` means division or remainder by zero.
pub fn binop(op: BinOp, ty: IntType, a: u64, b: u64) -> Option<u64> {
    let (x, y) = (ty.to_i128(a), ty.to_i128(b));
    let truth = |c: bool| Some(c as u64);
    let wrap = |v: i128| Some(ty.from_i128(v));
    match op {
        BinOp::Add => wrap(x + y),
        BinOp::Sub => wrap(x - y),
        BinOp::Mul => wrap(x.wrapping_mul(y)),
        BinOp::Div => (y != 0).then(|| ty.from_i128(x / y)),
        BinOp::Rem => (y != 0).then(|| ty.from_i128(x % y)),
        BinOp::Shl => {
            let amount = (b & ty.mask()) as u32 & (ty.width as u32 - 1);
            wrap(x << amount)
        }
        BinOp::Shr => {
            let amount = (b & ty.mask()) as u32 & (ty.width as u32 - 1);
            wrap(x >> amount)
        }
        BinOp::Lt => truth(x < y),
        BinOp::Le => truth(x <= y),
        BinOp::Gt => truth(x > y),
        BinOp::Ge => truth(x >= y),
        BinOp::Eq => truth(x == y),
        BinOp::Ne => truth(x != y),
        BinOp::BitAnd => Some(a & b & ty.mask()),
        BinOp::BitOr => Some((a | b) & ty.mask()),
        BinOp::BitXor => Some((a ^ b) & ty.mask()),
        BinOp::LogAnd => truth(x != 0 && y != 0),
        BinOp::LogOr => truth(x != 0 || y != 0),
    }
}

/// Apply a unary operator at operand type `ty` (already promoted).
pub fn unop(op: UnOp, ty: IntType, v: u64) -> u64 {
    match op {
        UnOp::Neg => ty.from_i128(-ty.to_i128(v)),
        UnOp::BitNot => !v & ty.mask(),
        UnOp::Not => (v & ty.mask() == 0) as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraparound_and_division() {
        let t = IntType::I8;
        assert_eq!(binop(BinOp::Add, t, 127, 1), Some(0x80));
        assert_eq!(binop(BinOp::Div, t, 0x80, 0xff), Some(0x80));
        assert_eq!(binop(BinOp::Rem, t, 0xf9, 2), Some(0xff)); // -7 % 2 == -1
        assert_eq!(binop(BinOp::Div, t, 0xf9, 2), Some(0xfd)); // -7 / 2 == -3
        assert_eq!(binop(BinOp::Div, t, 5, 0), None);
        assert_eq!(binop(BinOp::Shr, t, 0x80, 1), Some(0xc0));
        assert_eq!(binop(BinOp::Shr, IntType::U8, 0x80, 1), Some(0x40));
        assert_eq!(binop(BinOp::Shl, t, 1, 9), Some(2)); // amount masked to 1
        assert_eq!(binop(BinOp::Lt, t, 0xff, 0), Some(1));
        assert_eq!(binop(BinOp::Lt, IntType::U8, 0xff, 0), Some(0));
    }

    #[test]
    fn conversions() {
        assert_eq!(convert(0xff, IntType::I8, IntType::I32), 0xffff_ffff);
        assert_eq!(convert(0xff, IntType::U8, IntType::I32), 0xff);
        assert_eq!(convert(300, IntType::I32, IntType::U8), 44);
        assert_eq!(convert(256, IntType::I32, IntType::BOOL), 1);
        assert_eq!(convert(0, IntType::I32, IntType::BOOL), 0);
        assert_eq!(unop(UnOp::Neg, IntType::I32, 0x8000_0000), 0x8000_0000);
    }
}
