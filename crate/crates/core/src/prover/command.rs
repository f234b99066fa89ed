//! Proof command syntax: `done` and `apply <method>`.
//!
//! A method is a bare name (`simp`) or a parenthesised name with arguments
//! (`(simp add: a b)`, `(rule r)`), optionally followed by the repetition
//! operator `+`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MethodArg {
    Name(String),
    /// `add:`, `wp:`, `del:` ...
    Modifier(String),
    /// `?x` schematic variable.
    Schematic(String),
    Quoted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    pub args: Vec<MethodArg>,
    /// Nesting depth of the `+` operator: 0 none, 1 for `(m)+`, 2 for `((m)+)+`.
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Done,
    Apply(Method),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("empty command")]
    Empty,
    #[error("unknown command keyword `{0}`")]
    UnknownKeyword(String),
    #[error("missing method")]
    MissingMethod,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected `{0}`")]
    Unexpected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Schematic(String),
    Quoted(String),
    LParen,
    RParen,
    Plus,
    Colon,
    Other(char),
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.')
}

fn lex(text: &str) -> Result<Vec<Tok>, CommandError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            out.push(Tok::Word(chars[start..i].iter().collect()));
        } else if c == '?' {
            i += 1;
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            out.push(Tok::Schematic(chars[start..i].iter().collect()));
        } else if c == '"' {
            i += 1;
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            if i >= chars.len() {
                return Err(CommandError::Unexpected("unterminated quote".into()));
            }
            out.push(Tok::Quoted(chars[start..i].iter().collect()));
            i += 1;
        } else {
            out.push(match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '+' => Tok::Plus,
                ':' => Tok::Colon,
                other => Tok::Other(other),
            });
            i += 1;
        }
    }
    Ok(out)
}

fn parse_args(toks: &[Tok]) -> Result<Vec<MethodArg>, CommandError> {
    let mut args = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        match &toks[i] {
            Tok::Word(w) if toks.get(i + 1) == Some(&Tok::Colon) => {
                args.push(MethodArg::Modifier(w.clone()));
                i += 2;
                continue;
            }
            Tok::Word(w) => args.push(MethodArg::Name(w.clone())),
            Tok::Schematic(s) => args.push(MethodArg::Schematic(s.clone())),
            Tok::Quoted(q) => args.push(MethodArg::Quoted(q.clone())),
            Tok::LParen | Tok::RParen => return Err(CommandError::Unbalanced),
            Tok::Plus => return Err(CommandError::Unexpected("+".into())),
            Tok::Colon => return Err(CommandError::Unexpected(":".into())),
            Tok::Other(c) => return Err(CommandError::Unexpected(c.to_string())),
        }
        i += 1;
    }
    Ok(args)
}

impl Command {
    pub fn parse(text: &str) -> Result<Command, CommandError> {
        let toks = lex(text)?;
        let (first, rest) = toks.split_first().ok_or(CommandError::Empty)?;
        match first {
            Tok::Word(w) if w == "done" => {
                if rest.is_empty() {
                    Ok(Command::Done)
                } else {
                    Err(CommandError::Unexpected("text after done".into()))
                }
            }
            Tok::Word(w) if w == "apply" => parse_method(rest).map(Command::Apply),
            Tok::Word(w) => Err(CommandError::UnknownKeyword(w.clone())),
            _ => Err(CommandError::UnknownKeyword(format!("{first:?}"))),
        }
    }

    pub fn method(&self) -> Option<&Method> {
        match self {
            Command::Done => None,
            Command::Apply(m) => Some(m),
        }
    }
}

fn parse_method(toks: &[Tok]) -> Result<Method, CommandError> {
    let (body, plus) = match toks.last() {
        Some(Tok::Plus) => (&toks[..toks.len() - 1], 1),
        _ => (toks, 0),
    };
    match body {
        [] => Err(CommandError::MissingMethod),
        [Tok::Word(name)] => Ok(Method { name: name.clone(), args: Vec::new(), repeat: plus }),
        [Tok::LParen, inner @ .., Tok::RParen] => match inner.split_first() {
            Some((Tok::Word(name), args)) if inner.last() != Some(&Tok::Plus) => {
                Ok(Method { name: name.clone(), args: parse_args(args)?, repeat: plus })
            }
            Some((Tok::LParen | Tok::Word(_), _)) => {
                let m = parse_method(inner)?;
                if m.repeat == 0 {
                    return Err(CommandError::Unexpected("redundant parentheses".into()));
                }
                Ok(Method { repeat: m.repeat + plus, ..m })
            }
            _ => Err(CommandError::MissingMethod),
        },
        _ => {
            let opens = body.iter().filter(|t| **t == Tok::LParen).count();
            let closes = body.iter().filter(|t| **t == Tok::RParen).count();
            if opens != closes {
                Err(CommandError::Unbalanced)
            } else {
                Err(CommandError::Unexpected("malformed method expression".into()))
            }
        }
    }
}

/// Methods whose name arguments are variables or terms rather than facts.
const NON_FACT_METHODS: &[&str] = &["cases", "induct", "case_tac"];

impl Method {
    /// Fact names referenced by the method.
    pub fn fact_names(&self) -> Vec<&str> {
        if NON_FACT_METHODS.contains(&self.name.as_str()) {
            return Vec::new();
        }
        self.args
            .iter()
            .filter_map(|a| match a {
                MethodArg::Name(n) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            MethodArg::Name(n) => Some(n.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut text = if self.args.is_empty() {
            self.name.clone()
        } else {
            let mut t = format!("({}", self.name);
            for a in &self.args {
                match a {
                    MethodArg::Name(n) => t.push_str(&format!(" {n}")),
                    MethodArg::Modifier(m) => t.push_str(&format!(" {m}:")),
                    MethodArg::Schematic(s) => t.push_str(&format!(" ?{s}")),
                    MethodArg::Quoted(q) => t.push_str(&format!(" \"{q}\"")),
                }
            }
            t.push(')');
            t
        };
        for level in 0..self.repeat {
            text = if level == 0 { format!("{text}+") } else { format!("({text})+") };
        }
        f.write_str(&text)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Done => f.write_str("done"),
            Command::Apply(m) => write!(f, "apply {m}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_the_supported_forms() {
        assert_eq!(Command::parse("done").unwrap(), Command::Done);
        let c = Command::parse("apply simp").unwrap();
        assert_eq!(c.method().unwrap().name, "simp");
        let c = Command::parse("apply (simp add: add_zero zero_add)").unwrap();
        let m = c.method().unwrap();
        assert_eq!(m.args[0], MethodArg::Modifier("add".into()));
        assert_eq!(m.fact_names(), vec!["add_zero", "zero_add"]);
        let c = Command::parse("apply (rule conj_intro)+").unwrap();
        assert_eq!(c.method().unwrap().repeat, 1);
        assert_eq!(c.to_string(), "apply (rule conj_intro)+");
        let c = Command::parse("apply (cases b)").unwrap();
        assert!(c.method().unwrap().fact_names().is_empty());
    }

    #[test]
    fn display_is_canonical() {
        let c = Command::parse("apply   ( simp   add:  a  b )").unwrap();
        assert_eq!(c.to_string(), "apply (simp add: a b)");
        assert_eq!(Command::parse("apply (simp)").unwrap().to_string(), "apply simp");
    }

    #[test]
    fn rejects_malformed_commands() {
        assert_eq!(Command::parse(""), Err(CommandError::Empty));
        assert_eq!(Command::parse("apply"), Err(CommandError::MissingMethod));
        assert_eq!(Command::parse("apply (simp"), Err(CommandError::Unbalanced));
        assert!(matches!(Command::parse("lemma foo"), Err(CommandError::UnknownKeyword(_))));
        assert!(Command::parse("apply ((simp))").is_err());
        assert!(Command::parse("apply (simp) (rule r)").is_err());
        assert!(Command::parse("done done").is_err());
    }

    #[test]
    fn nested_repetition() {
        let c = Command::parse("apply ((rule r)+)+").unwrap();
        assert_eq!(c.method().unwrap().repeat, 2);
        assert_eq!(c.to_string(), "apply ((rule r)+)+");
        assert_eq!(Command::parse("apply simp+").unwrap().to_string(), "apply simp+");
        let bare = Command::parse("apply ((simp)+)+").unwrap();
        assert_eq!(bare.to_string(), "apply (simp+)+");
        assert_eq!(Command::parse(&bare.to_string()).unwrap(), bare);
    }

    fn method_strategy() -> impl Strategy<Value = Method> {
        let arg = prop_oneof![
            "[a-z][a-z_]{0,6}".prop_map(MethodArg::Name),
            "[a-z]{1,3}".prop_map(MethodArg::Modifier),
            "[a-z]{1,3}".prop_map(MethodArg::Schematic),
        ];
        ("[a-z][a-z_]{0,5}", proptest::collection::vec(arg, 0..4), 0usize..3)
            .prop_map(|(name, args, repeat)| Method { name, args, repeat })
    }

    proptest! {
        #[test]
        fn rendering_reparses(m in method_strategy()) {
            let c = Command::Apply(m);
            prop_assume!(c.method().unwrap().name != "done");
            prop_assert_eq!(Command::parse(&c.to_string()).unwrap(), c);
        }
    }

    #[test]
    fn schematic_and_quoted_arguments() {
        let c = Command::parse("apply (rule_tac x=\"?a\" in foo)");
        assert!(c.is_err());
        let c = Command::parse("apply (rule ?r)").unwrap();
        assert_eq!(c.method().unwrap().args, vec![MethodArg::Schematic("r".into())]);
    }
}
