//! Complex-valued expressions over surface points, used for impedance
//! coefficients given as text, e.g. `5+exp(2*pi*x1*i)`.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := '-' factor | power
//! power   := primary ('^' factor)?
//! primary := number | 'x1' | 'x2' | 'pi' | 'i'
//!          | ('exp'|'sin'|'cos'|'sqrt') '(' expr ')' | '(' expr ')'
//! ```

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(Complex64),
    X1,
    X2,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Sqrt(Box<Node>),
}

/// A parsed expression, evaluable at surface points.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let mut parser = Parser { text, bytes: text.as_bytes(), pos: 0 };
        parser.skip_ws();
        if parser.pos == parser.bytes.len() {
            return Err(parser.fail("empty expression"));
        }
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.fail("trailing input"));
        }
        Ok(Expr { root, source: text.to_string() })
    }

    /// The original text, echoed verbatim.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Complex64 {
        eval_node(&self.root, x1, x2)
    }
}

fn eval_node(node: &Node, x1: f64, x2: f64) -> Complex64 {
    match node {
        Node::Const(c) => *c,
        Node::X1 => Complex64::new(x1, 0.0),
        Node::X2 => Complex64::new(x2, 0.0),
        Node::Neg(a) => {
            // Adding 0.0 flushes negative zeros so that e.g. sqrt(-1) sits
            // on the principal side of the branch cut (+i, not -i).
            let v = eval_node(a, x1, x2);
            Complex64::new(-v.re + 0.0, -v.im + 0.0)
        }
        Node::Add(a, b) => eval_node(a, x1, x2) + eval_node(b, x1, x2),
        Node::Sub(a, b) => eval_node(a, x1, x2) - eval_node(b, x1, x2),
        Node::Mul(a, b) => eval_node(a, x1, x2) * eval_node(b, x1, x2),
        Node::Div(a, b) => eval_node(a, x1, x2) / eval_node(b, x1, x2),
        Node::Pow(a, b) => eval_node(a, x1, x2).powc(eval_node(b, x1, x2)),
        Node::Exp(a) => eval_node(a, x1, x2).exp(),
        Node::Sin(a) => eval_node(a, x1, x2).sin(),
        Node::Cos(a) => eval_node(a, x1, x2).cos(),
        Node::Sqrt(a) => eval_node(a, x1, x2).sqrt(),
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn fail(&self, why: &str) -> Error {
        Error::Config(format!(
            "expression '{}': {} at byte {}",
            self.text, why, self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            node = if op == b'+' {
                Node::Add(Box::new(node), Box::new(rhs))
            } else {
                Node::Sub(Box::new(node), Box::new(rhs))
            };
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            node = if op == b'*' {
                Node::Mul(Box::new(node), Box::new(rhs))
            } else {
                Node::Div(Box::new(node), Box::new(rhs))
            };
        }
        Ok(node)
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.fail("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.fail("expected a number, name, or '('")),
            None => Err(self.fail("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit() || *b == b'.')
        {
            self.pos += 1;
        }
        if self.bytes.get(self.pos).is_some_and(|b| *b == b'e' || *b == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.bytes.get(self.pos).is_some_and(|b| *b == b'+' || *b == b'-') {
                self.pos += 1;
            }
            if self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // Not an exponent after all (e.g. "2*exp(..)" would never
                // get here, but "2e" alone rolls back to the bare number).
                self.pos = mark;
            }
        }
        let literal = &self.text[start..self.pos];
        literal
            .parse::<f64>()
            .map(|v| Node::Const(Complex64::new(v, 0.0)))
            .map_err(|_| {
                self.pos = start;
                self.fail("malformed number")
            })
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        match name {
            "x1" => Ok(Node::X1),
            "x2" => Ok(Node::X2),
            "pi" => Ok(Node::Const(Complex64::new(core::f64::consts::PI, 0.0))),
            "i" => Ok(Node::Const(Complex64::new(0.0, 1.0))),
            "exp" | "sin" | "cos" | "sqrt" => {
                if self.peek() != Some(b'(') {
                    return Err(self.fail(&format!("function '{name}' needs '('")));
                }
                self.pos += 1;
                let arg = Box::new(self.expr()?);
                if self.peek() != Some(b')') {
                    return Err(self.fail("expected ')'"));
                }
                self.pos += 1;
                Ok(match name {
                    "exp" => Node::Exp(arg),
                    "sin" => Node::Sin(arg),
                    "cos" => Node::Cos(arg),
                    _ => Node::Sqrt(arg),
                })
            }
            _ => {
                self.pos = start;
                Err(self.fail(&format!("unknown name '{name}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn impedance_example_evaluates() {
        let rho = Expr::parse("5+exp(2*pi*x1*i)").unwrap();
        assert!(close(rho.eval(0.0, 0.8), Complex64::new(6.0, 0.0)));
        assert!(close(rho.eval(0.25, 0.8), Complex64::new(5.0, 1.0)));
        assert!(close(rho.eval(0.5, 0.8), Complex64::new(4.0, 0.0)));
        assert_eq!(rho.source(), "5+exp(2*pi*x1*i)");
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str| Expr::parse(s).unwrap().eval(0.0, 0.0);
        assert!(close(v("1+2*3^2"), Complex64::new(19.0, 0.0)));
        assert!(close(v("2^3^2"), Complex64::new(512.0, 0.0)), "power is right-associative");
        assert!(close(v("-2^2"), Complex64::new(-4.0, 0.0)), "minus binds looser than power");
        assert!(close(v("(1+2)*3"), Complex64::new(9.0, 0.0)));
        assert!(close(v("7-4-2"), Complex64::new(1.0, 0.0)), "subtraction is left-associative");
        assert!(close(v("8/4/2"), Complex64::new(1.0, 0.0)));
        assert!(close(v("1.5e2"), Complex64::new(150.0, 0.0)));
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("x2*i + sqrt(-1)").unwrap();
        assert!(close(e.eval(0.0, 0.8), Complex64::new(0.0, 1.8)));
        let v = |s: &str| Expr::parse(s).unwrap().eval(0.3, 0.0);
        assert!(close(v("sin(pi/2)"), Complex64::new(1.0, 0.0)));
        assert!(close(v("cos(0)"), Complex64::new(1.0, 0.0)));
        assert!(close(v("exp(i*pi)"), Complex64::new(-1.0, 0.0)));
        assert!(close(v("x1^2"), Complex64::new(0.09, 0.0)));
    }

    #[test]
    fn whitespace_is_ignored() {
        let a = Expr::parse("5+exp(2*pi*x1*i)").unwrap();
        let b = Expr::parse("  5 + exp( 2 * pi * x1 * i )  ").unwrap();
        assert!(close(a.eval(0.37, 0.0), b.eval(0.37, 0.0)));
    }

    #[test]
    fn errors_carry_positions() {
        for (text, fragment) in [
            ("", "empty expression"),
            ("5+", "unexpected end"),
            ("5)", "trailing input"),
            ("(5", "expected ')'"),
            ("x3", "unknown name 'x3'"),
            ("foo(2)", "unknown name 'foo'"),
            ("exp 2", "needs '('"),
            ("2*/3", "expected a number"),
        ] {
            let err = Expr::parse(text).unwrap_err();
            let msg = err.to_string();
            assert!(
                msg.contains(fragment) && msg.contains("byte"),
                "'{text}' gave: {msg}"
            );
        }
    }
}
