//! Parser for the supported SMILES subset: organic-subset atoms, aromatic
//! lowercase atoms, brackets with element/H-count/charge, branches, explicit
//! bonds and ring closures (`0-9`, `%nn`). Stereo, isotopes, atom classes and
//! (by default) multi-component `.` input are rejected.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, GraphError, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-ASCII input")]
    NonAscii,
    #[error("unknown atom '{symbol}' at position {pos}")]
    UnknownAtom { pos: usize, symbol: String },
    #[error("ring bond {label} opened but never closed")]
    UnmatchedRingBond { label: u32 },
    #[error("unmatched parenthesis at position {pos}")]
    UnmatchedParenthesis { pos: usize },
    #[error("unsupported feature '{feature}' at position {pos}")]
    UnsupportedFeature { pos: usize, feature: String },
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept `.`-separated components.
    pub allow_components: bool,
}

pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    parse_smiles_with(text, ParseOptions::default())
}

pub fn parse_smiles_with(text: &str, options: ParseOptions) -> Result<MolecularGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    if !text.is_ascii() {
        return Err(SmilesError::NonAscii);
    }
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        options,
    };
    p.run()?;
    Ok(MolecularGraph::new(p.atoms, p.bonds, options.allow_components)?)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    options: ParseOptions,
}

const BRACKET_ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K",
    "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",
    "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr",
    "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu",
];

fn element_of(symbol: &str) -> Element {
    match symbol {
        "B" => Element::B,
        "C" => Element::C,
        "N" => Element::N,
        "O" => Element::O,
        "P" => Element::P,
        "S" => Element::S,
        "F" => Element::F,
        "Cl" => Element::Cl,
        "Br" => Element::Br,
        "I" => Element::I,
        _ => Element::Other,
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.s.get(self.pos + offset).copied()
    }

    fn syntax(&self, message: &str) -> SmilesError {
        SmilesError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn unsupported(&self, feature: &str) -> SmilesError {
        SmilesError::UnsupportedFeature {
            pos: self.pos,
            feature: feature.to_string(),
        }
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn connect(&mut self, a: usize, b: usize, order: Option<BondOrder>) {
        let order = order.unwrap_or_else(|| self.default_order(a, b));
        self.bonds.push(Bond { a, b, order });
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(self.syntax("branch before any atom"));
                    };
                    if pending.is_some() {
                        return Err(self.syntax("bond before branch"));
                    }
                    branches.push((p, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(SmilesError::UnmatchedParenthesis { pos: self.pos });
                    };
                    if pending.is_some() {
                        return Err(self.syntax("dangling bond"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.syntax("misplaced bond symbol"));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    pending = Some((order, self.pos));
                    self.pos += 1;
                }
                b'/' | b'\\' => return Err(self.unsupported("directional bond")),
                b'$' => return Err(self.unsupported("quadruple bond")),
                b'@' => return Err(self.unsupported("chirality")),
                b'.' => {
                    if !self.options.allow_components {
                        return Err(self.unsupported("disconnected components"));
                    }
                    if pending.is_some() || !branches.is_empty() {
                        return Err(self.syntax("'.' inside a branch or after a bond"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(self.syntax("ring bond before any atom"));
                    };
                    let label = self.ring_label()?;
                    let order = pending.take().map(|(o, _)| o);
                    match rings.remove(&label) {
                        Some((open, open_order, _)) => {
                            let order = match (open_order, order) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(self.syntax("conflicting ring bond orders"))
                                }
                                (a, b) => a.or(b),
                            };
                            if open == p {
                                return Err(GraphError::SelfLoop(p).into());
                            }
                            self.connect(open, p, order);
                        }
                        None => {
                            rings.insert(label, (p, order, self.pos));
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    self.atoms.push(atom);
                    let id = self.atoms.len() - 1;
                    if let Some(p) = prev {
                        self.connect(p, id, pending.take().map(|(o, _)| o));
                    }
                    prev = Some(id);
                }
            }
        }
        if let Some((_, pos)) = pending {
            return Err(SmilesError::Syntax {
                pos,
                message: "dangling bond".into(),
            });
        }
        if let Some((_, pos)) = branches.pop() {
            return Err(SmilesError::UnmatchedParenthesis { pos });
        }
        if let Some((&label, _)) = rings.iter().next() {
            return Err(SmilesError::UnmatchedRingBond { label });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::EmptyInput);
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, SmilesError> {
        let c = self.peek().unwrap();
        if c == b'%' {
            match (self.peek_at(1), self.peek_at(2)) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    Ok(((a - b'0') * 10 + (b - b'0')) as u32)
                }
                _ => Err(self.syntax("'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn atom(&mut self) -> Result<Atom, SmilesError> {
        let c = self.peek().unwrap();
        let start = self.pos;
        let atom = match c {
            b'[' => return self.bracket(),
            b'*' => Atom::new(Element::Other),
            b'C' if self.peek_at(1) == Some(b'l') => {
                self.pos += 1;
                Atom::new(Element::Cl)
            }
            b'B' if self.peek_at(1) == Some(b'r') => {
                self.pos += 1;
                Atom::new(Element::Br)
            }
            b'B' => Atom::new(Element::B),
            b'C' => Atom::new(Element::C),
            b'N' => Atom::new(Element::N),
            b'O' => Atom::new(Element::O),
            b'P' => Atom::new(Element::P),
            b'S' => Atom::new(Element::S),
            b'F' => Atom::new(Element::F),
            b'I' => Atom::new(Element::I),
            b'b' => Atom::aromatic(Element::B),
            b'c' => Atom::aromatic(Element::C),
            b'n' => Atom::aromatic(Element::N),
            b'o' => Atom::aromatic(Element::O),
            b'p' => Atom::aromatic(Element::P),
            b's' => Atom::aromatic(Element::S),
            _ => {
                let end = self.s[start..]
                    .iter()
                    .position(|b| !b.is_ascii_alphabetic())
                    .map_or(self.s.len(), |k| start + k.max(1));
                return Err(SmilesError::UnknownAtom {
                    pos: start,
                    symbol: String::from_utf8_lossy(&self.s[start..end]).into_owned(),
                });
            }
        };
        self.pos += 1;
        Ok(atom)
    }

    fn bracket(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.unsupported("isotope"));
        }
        let sym_start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                (Element::Other, false)
            }
            Some(c) if c.is_ascii_uppercase() => {
                let two = self.peek_at(1).filter(u8::is_ascii_lowercase).map(|l| [c, l]);
                let sym = match two {
                    Some(pair) if BRACKET_ELEMENTS.contains(&std::str::from_utf8(&pair).unwrap()) => {
                        self.pos += 2;
                        String::from_utf8(pair.to_vec()).unwrap()
                    }
                    _ => {
                        self.pos += 1;
                        (c as char).to_string()
                    }
                };
                if !BRACKET_ELEMENTS.contains(&sym.as_str()) {
                    return Err(SmilesError::UnknownAtom {
                        pos: sym_start,
                        symbol: sym,
                    });
                }
                (element_of(&sym), false)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = [c, self.peek_at(1).unwrap_or(b' ')];
                if &two == b"se" || &two == b"as" {
                    self.pos += 2;
                    (Element::Other, true)
                } else {
                    let e = match c {
                        b'b' => Element::B,
                        b'c' => Element::C,
                        b'n' => Element::N,
                        b'o' => Element::O,
                        b'p' => Element::P,
                        b's' => Element::S,
                        _ => {
                            return Err(SmilesError::UnknownAtom {
                                pos: sym_start,
                                symbol: (c as char).to_string(),
                            })
                        }
                    };
                    self.pos += 1;
                    (e, true)
                }
            }
            _ => return Err(self.syntax("bracket atom without element")),
        };
        if self.peek() == Some(b'@') {
            return Err(self.unsupported("chirality"));
        }
        let mut hydrogens = None;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            let mut count = 1u8;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                count = d - b'0';
                self.pos += 1;
            }
            hydrogens = Some(count);
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                charge = unit * (d - b'0') as i32;
                self.pos += 1;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => return Err(self.unsupported("atom class")),
            Some(b'@') => return Err(self.unsupported("chirality")),
            None => return Err(SmilesError::Syntax {
                pos: open,
                message: "unterminated bracket atom".into(),
            }),
            Some(_) => return Err(self.syntax("unexpected character in bracket atom")),
        }
        let mut atom = Atom::new(element).with_charge(charge);
        atom.aromatic = aromatic;
        atom.hydrogens = hydrogens;
        Ok(atom)
    }
}
