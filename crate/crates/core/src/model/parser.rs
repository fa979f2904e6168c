//! Reader for the line-oriented model format.
//!
//! ```text
//! model <identifier>
//! var <name> [, <name> ...]
//! eq <name> = <expr>
//! init <name> = <number>
//! obs <linear-expr>
//! horizon <number>
//! ```
//!
//! `#` starts a comment. Expressions use `+ - * / ^ ( )`, numeric literals
//! and declared variable names. `^` binds tighter than unary minus and takes
//! a non-negative integer literal exponent.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::expr::Expr;
use super::{ModelError, OdeSystem};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    col: usize,
}

fn tokenize(line: &str, lineno: usize, start_col: usize) -> Result<Vec<Token>, ModelError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = start_col + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ModelError::Syntax {
                line: lineno,
                column: col,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token { tok: Tok::Number(value), text, col });
        } else if c.is_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text.clone()), text, col });
        } else if "+-*/^(),=".contains(c) {
            out.push(Token { tok: Tok::Op(c), text: c.to_string(), col });
            i += 1;
        } else {
            return Err(ModelError::Syntax {
                line: lineno,
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

/// Recursive-descent expression parser over the tokens of one line.
struct ExprParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a HashMap<String, usize>,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, op: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Op(c), .. }) if *c == op)
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.end_col, |t| t.col)
    }

    fn syntax(&self, message: impl Into<String>) -> ModelError {
        ModelError::Syntax { line: self.line, column: self.col(), message: message.into() }
    }

    fn expr(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = lhs + self.term()?;
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = lhs * self.unary()?;
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ModelError> {
        if self.peek_op('-') {
            self.pos += 1;
            Ok(-self.unary()?)
        } else if self.peek_op('+') {
            self.pos += 1;
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ModelError> {
        let mut base = self.primary()?;
        while self.peek_op('^') {
            self.pos += 1;
            let col = self.col();
            let exponent = match self.peek() {
                Some(Token { tok: Tok::Number(_), text, .. }) if text.chars().all(|c| c.is_ascii_digit()) => {
                    text.parse::<u32>().map_err(|_| ModelError::NonIntegerExponent {
                        line: self.line,
                        column: col,
                        found: text.clone(),
                    })?
                }
                Some(t) => {
                    return Err(ModelError::NonIntegerExponent {
                        line: self.line,
                        column: col,
                        found: t.text.clone(),
                    })
                }
                None => return Err(self.syntax("expected exponent after `^`")),
            };
            self.pos += 1;
            base = base.pow(exponent);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ModelError> {
        let Some(token) = self.peek() else {
            return Err(self.syntax("unexpected end of expression"));
        };
        match &token.tok {
            Tok::Number(v) => {
                self.pos += 1;
                Ok(Expr::Const(*v))
            }
            Tok::Ident(name) => match self.vars.get(name) {
                Some(&i) => {
                    self.pos += 1;
                    Ok(Expr::Var(i))
                }
                None => Err(ModelError::UndeclaredVariable {
                    line: self.line,
                    column: token.col,
                    name: name.clone(),
                }),
            },
            Tok::Op('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.peek_op(')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Op(c) => Err(self.syntax(format!("unexpected `{c}`"))),
        }
    }
}

fn parse_expression(
    tokens: &[Token],
    line: usize,
    end_col: usize,
    vars: &HashMap<String, usize>,
) -> Result<Expr, ModelError> {
    let mut p = ExprParser { tokens, pos: 0, line, end_col, vars };
    let e = p.expr()?;
    if p.pos != tokens.len() {
        return Err(p.syntax(format!("unexpected `{}`", tokens[p.pos].text)));
    }
    Ok(e.fold_constants())
}

/// Parse a single expression over the given variable names.
pub fn parse_expr(text: &str, var_names: &[String]) -> Result<Expr, ModelError> {
    let vars = var_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let tokens = tokenize(text, 1, 1)?;
    parse_expression(&tokens, 1, text.chars().count() + 1, &vars)
}

/// Parse and validate a model file.
pub fn parse_model(text: &str) -> Result<OdeSystem, ModelError> {
    let mut name: Option<String> = None;
    let mut var_names: Vec<String> = Vec::new();
    let mut vars: HashMap<String, usize> = HashMap::new();
    let mut equations: Vec<Option<Expr>> = Vec::new();
    let mut inits: Vec<Option<f64>> = Vec::new();
    let mut obs_rows: Vec<Vec<f64>> = Vec::new();
    let mut horizon: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = content.chars().count() - trimmed.chars().count();
        let keyword: String = trimmed.chars().take_while(|c| !c.is_whitespace()).collect();
        let rest_offset = indent + keyword.chars().count();
        let rest: String = content.chars().skip(rest_offset).collect();
        let end_col = content.trim_end().chars().count() + 1;
        let tokens = tokenize(&rest, lineno, rest_offset + 1)?;
        let syntax = |column: usize, message: &str| ModelError::Syntax {
            line: lineno,
            column,
            message: message.to_string(),
        };

        match keyword.as_str() {
            "model" => match tokens.as_slice() {
                [Token { tok: Tok::Ident(n), .. }] => {
                    if name.replace(n.clone()).is_some() {
                        return Err(syntax(indent + 1, "duplicate `model` line"));
                    }
                }
                _ => return Err(syntax(rest_offset + 1, "expected `model <identifier>`")),
            },
            "var" => {
                if !equations.iter().all(Option::is_none) || !obs_rows.is_empty() {
                    return Err(syntax(indent + 1, "`var` declarations must precede equations and observables"));
                }
                let mut expect_name = true;
                for t in &tokens {
                    match (&t.tok, expect_name) {
                        (Tok::Ident(n), true) => {
                            if vars.contains_key(n) {
                                return Err(ModelError::DuplicateVariable {
                                    line: lineno,
                                    column: t.col,
                                    name: n.clone(),
                                });
                            }
                            vars.insert(n.clone(), var_names.len());
                            var_names.push(n.clone());
                            equations.push(None);
                            inits.push(None);
                            expect_name = false;
                        }
                        (Tok::Op(','), false) => expect_name = true,
                        _ => return Err(syntax(t.col, "expected comma-separated variable names")),
                    }
                }
                if expect_name {
                    return Err(syntax(end_col, "expected a variable name"));
                }
            }
            "eq" | "init" => {
                let (target, expr_tokens) = match tokens.as_slice() {
                    [Token { tok: Tok::Ident(n), col, .. }, Token { tok: Tok::Op('='), .. }, rest @ ..] => {
                        let i = *vars.get(n).ok_or_else(|| ModelError::UndeclaredVariable {
                            line: lineno,
                            column: *col,
                            name: n.clone(),
                        })?;
                        (i, rest)
                    }
                    _ => return Err(syntax(rest_offset + 1, &format!("expected `{keyword} <name> = ...`"))),
                };
                let expr = parse_expression(expr_tokens, lineno, end_col, &vars)?;
                let var = var_names[target].clone();
                if keyword == "eq" {
                    if equations[target].replace(expr).is_some() {
                        return Err(ModelError::DuplicateDefinition { line: lineno, what: "eq", name: var });
                    }
                } else {
                    let Expr::Const(v) = expr else {
                        return Err(syntax(rest_offset + 1, "initial value must be a numeric constant"));
                    };
                    if inits[target].replace(v).is_some() {
                        return Err(ModelError::DuplicateDefinition { line: lineno, what: "init", name: var });
                    }
                }
            }
            "obs" => {
                let expr = parse_expression(&tokens, lineno, end_col, &vars)?;
                match expr.affine_coefficients(var_names.len()) {
                    Some((row, 0.0)) => obs_rows.push(row),
                    _ => return Err(ModelError::NonLinearObservable { line: lineno }),
                }
            }
            "horizon" => {
                let expr = parse_expression(&tokens, lineno, end_col, &vars)?;
                let Expr::Const(v) = expr else {
                    return Err(syntax(rest_offset + 1, "horizon must be a numeric constant"));
                };
                if horizon.replace(v).is_some() {
                    return Err(syntax(indent + 1, "duplicate `horizon` line"));
                }
            }
            other => return Err(syntax(indent + 1, &format!("unknown keyword `{other}`"))),
        }
    }

    if var_names.is_empty() {
        return Err(ModelError::NoVariables);
    }
    let drift = equations
        .into_iter()
        .zip(&var_names)
        .map(|(e, n)| e.ok_or_else(|| ModelError::MissingEquation { name: n.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let init = inits
        .into_iter()
        .zip(&var_names)
        .map(|(v, n)| v.ok_or_else(|| ModelError::MissingInit { name: n.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let horizon = horizon.ok_or(ModelError::MissingHorizon)?;
    if obs_rows.is_empty() {
        return Err(ModelError::MissingObservables);
    }
    let m = var_names.len();
    let observables = DMatrix::from_fn(obs_rows.len(), m, |i, j| obs_rows[i][j]);

    OdeSystem::new(
        name.unwrap_or_else(|| "model".to_string()),
        var_names,
        drift,
        vec![DVector::from_vec(init)],
        horizon,
        observables,
    )
}
