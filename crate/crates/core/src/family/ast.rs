use std::fmt;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Functions recognised in entry expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sqrt,
    Sin,
    Cos,
    Conj,
    Re,
    Im,
    Abs,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Exp,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Conj,
        Func::Re,
        Func::Im,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Conj => "conj",
            Func::Re => "re",
            Func::Im => "im",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Exp => z.exp(),
            Func::Sqrt => z.sqrt(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Conj => z.conj(),
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
            Func::Abs => Complex64::new(z.norm(), 0.0),
        }
    }
}

/// Parsed entry expression. Parameter references hold their slot in the
/// family's parameter list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    ImagUnit,
    Param { name: String, index: usize },
    /// `name` resolved as `re_name + i·im_name`.
    Composite { name: String, re: usize, im: usize },
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, params: &[f64]) -> Complex64 {
        match self {
            Expr::Const(v) => Complex64::new(*v, 0.0),
            Expr::ImagUnit => Complex64::new(0.0, 1.0),
            Expr::Param { index, .. } => Complex64::new(params[*index], 0.0),
            Expr::Composite { re, im, .. } => Complex64::new(params[*re], params[*im]),
            Expr::Neg(e) => -e.eval(params),
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.eval(params), r.eval(params));
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                }
            }
            Expr::Pow(base, k) => int_pow(base.eval(params), *k),
            Expr::Call(f, arg) => f.apply(arg.eval(params)),
        }
    }

    /// True if the expression mentions any parameter.
    pub fn references_params(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::ImagUnit => false,
            Expr::Param { .. } | Expr::Composite { .. } => true,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.references_params(),
            Expr::Binary(_, l, r) => l.references_params() || r.references_params(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Pow(..) => 3,
            _ => 4,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{})", -v),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::ImagUnit => write!(f, "i"),
            Expr::Param { name, .. } | Expr::Composite { name, .. } => write!(f, "{name}"),
            Expr::Neg(e) => {
                write!(f, "(-")?;
                e.write_at(f, 3)?;
                write!(f, ")")
            }
            Expr::Binary(op, l, r) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                };
                l.write_at(f, lp)?;
                write!(f, "{sym}")?;
                r.write_at(f, rp)
            }
            Expr::Pow(base, k) => {
                base.write_at(f, 4)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, arg) => {
                write!(f, "{}(", func.name())?;
                arg.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// Integer power by repeated squaring.
fn int_pow(z: Complex64, mut k: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut base = z;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}
