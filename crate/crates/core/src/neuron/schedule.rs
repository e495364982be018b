//! Microcode block schedules.
//!
//! A schedule is an ordered list of blocks; each block declares the single
//! compartment-state word it may access and holds a short instruction list
//! over fields, scratch registers and group constants. Schedules are stored
//! as a line-oriented `key: value` text document:
//!
//! ```text
//! block: blk0_isyn
//! word: 0
//! op: mul %r1 $isyn @alpha
//! ```
//!
//! `$name` is a compartment field, `%rN` a Q12 scratch register, `@name` a
//! group constant (or `@da`, the dendrite input), and a bare integer a shift
//! count. `#` starts a comment.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{CompartmentWords, Field, GroupConstants};
use crate::fxp::{self, Fixed};

const SHIPPED: &str = include_str!("../../config/izhikevich.sched");

pub const MAX_REGISTERS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("block {block}: unknown field '{field}'")]
    UnknownField { block: String, field: String },
    #[error("block {block}: unknown constant '@{name}'")]
    UnknownConstant { block: String, name: String },
    #[error("block {block}: malformed instruction '{instr}'")]
    Malformed { block: String, instr: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Field(String),
    Reg(u8),
    Const(String),
    Imm(u32),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Field(name) => write!(f, "${name}"),
            Operand::Reg(r) => write!(f, "%r{r}"),
            Operand::Const(name) => write!(f, "@{name}"),
            Operand::Imm(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Operand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix('$') {
            if name.is_empty() {
                return Err("empty field name".into());
            }
            Ok(Operand::Field(name.to_string()))
        } else if let Some(r) = s.strip_prefix("%r") {
            let idx: u8 = r.parse().map_err(|_| format!("bad register '{s}'"))?;
            if idx as usize >= MAX_REGISTERS {
                return Err(format!("register '{s}' out of range"));
            }
            Ok(Operand::Reg(idx))
        } else if let Some(name) = s.strip_prefix('@') {
            if name.is_empty() {
                return Err("empty constant name".into());
            }
            Ok(Operand::Const(name.to_string()))
        } else {
            s.parse()
                .map(Operand::Imm)
                .map_err(|_| format!("unrecognized operand '{s}'"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpCode {
    Mov,
    Add,
    Sub,
    Mul,
    Shr,
    ShrRound,
    Gt,
    Sel,
    Spike,
}

impl OpCode {
    const ALL: [OpCode; 9] = [
        OpCode::Mov,
        OpCode::Add,
        OpCode::Sub,
        OpCode::Mul,
        OpCode::Shr,
        OpCode::ShrRound,
        OpCode::Gt,
        OpCode::Sel,
        OpCode::Spike,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpCode::Mov => "mov",
            OpCode::Add => "add",
            OpCode::Sub => "sub",
            OpCode::Mul => "mul",
            OpCode::Shr => "shr",
            OpCode::ShrRound => "shr_round",
            OpCode::Gt => "gt",
            OpCode::Sel => "sel",
            OpCode::Spike => "spike",
        }
    }

    fn arity(self) -> usize {
        match self {
            OpCode::Spike => 1,
            OpCode::Mov => 2,
            OpCode::Sel => 4,
            _ => 3,
        }
    }

    fn writes(self) -> bool {
        self != OpCode::Spike
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instr {
    pub op: OpCode,
    pub args: Vec<Operand>,
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.mnemonic())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

impl FromStr for Instr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let mnemonic = parts.next().ok_or("empty instruction")?;
        let op = OpCode::ALL
            .into_iter()
            .find(|o| o.mnemonic() == mnemonic)
            .ok_or_else(|| format!("unknown opcode '{mnemonic}'"))?;
        let args = parts.map(str::parse).collect::<Result<Vec<Operand>, _>>()?;
        if args.len() != op.arity() {
            return Err(format!(
                "'{mnemonic}' takes {} operands, got {}",
                op.arity(),
                args.len()
            ));
        }
        if op.writes() && !matches!(args[0], Operand::Field(_) | Operand::Reg(_)) {
            return Err(format!(
                "destination of '{mnemonic}' must be a field or register"
            ));
        }
        let shift = matches!(op, OpCode::Shr | OpCode::ShrRound);
        if shift != matches!(args.last(), Some(Operand::Imm(_)))
            || (!shift && args.iter().any(|a| matches!(a, Operand::Imm(_))))
        {
            return Err(
                "shr and shr_round take an immediate shift count; no other op takes one".into(),
            );
        }
        Ok(Instr { op, args })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    /// Declared compartment-state word, or `None` for register-only blocks.
    pub word: Option<u8>,
    pub ops: Vec<Instr>,
}

impl Block {
    /// Field identifiers referenced anywhere in the block.
    pub fn fields(&self) -> BTreeSet<&str> {
        self.ops
            .iter()
            .flat_map(|i| &i.args)
            .filter_map(|a| match a {
                Operand::Field(n) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn registers(&self) -> BTreeSet<u8> {
        self.ops
            .iter()
            .flat_map(|i| &i.args)
            .filter_map(|a| match a {
                Operand::Reg(r) => Some(*r),
                _ => None,
            })
            .collect()
    }
}

/// A block that reaches into more than one compartment-state word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub block: String,
    pub words: BTreeSet<u8>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<_> = self.words.iter().map(u8::to_string).collect();
        write!(
            f,
            "block {} accesses words {{{}}}",
            self.block,
            words.join(", ")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockSchedule {
    pub blocks: Vec<Block>,
}

impl BlockSchedule {
    /// The schedule the fixed-point neuron implements.
    pub fn izhikevich() -> Self {
        SHIPPED.parse().expect("shipped schedule parses")
    }

    pub fn shipped_text() -> &'static str {
        SHIPPED
    }

    /// Checks the one-word-per-block rule. A block's word set is its declared
    /// word plus the words of every field it references.
    pub fn validate(&self) -> Result<Vec<Violation>, ScheduleError> {
        let mut violations = Vec::new();
        for block in &self.blocks {
            let mut words: BTreeSet<u8> = block.word.into_iter().collect();
            for name in block.fields() {
                let field: Field = name.parse().map_err(|_| ScheduleError::UnknownField {
                    block: block.name.clone(),
                    field: name.to_string(),
                })?;
                words.insert(field.word() as u8);
            }
            if words.len() > 1 {
                violations.push(Violation {
                    block: block.name.clone(),
                    words,
                });
            }
        }
        Ok(violations)
    }

    /// Interprets the schedule for one timestep.
    pub fn execute(
        &self,
        words: CompartmentWords,
        da: Fixed,
        consts: &GroupConstants,
    ) -> Result<(CompartmentWords, bool), ScheduleError> {
        let mut regs = [Fixed::zero(fxp::REG_FMT); MAX_REGISTERS];
        let mut state = words;
        let mut spiked = false;
        for block in &self.blocks {
            let read = |op: &Operand,
                        regs: &[Fixed],
                        state: &CompartmentWords|
             -> Result<Fixed, ScheduleError> {
                match op {
                    Operand::Reg(r) => Ok(regs[*r as usize]),
                    Operand::Field(name) => {
                        name.parse::<Field>().map(|f| state.get(f)).map_err(|_| {
                            ScheduleError::UnknownField {
                                block: block.name.clone(),
                                field: name.clone(),
                            }
                        })
                    }
                    Operand::Const(name) if name == "da" => Ok(da),
                    Operand::Const(name) => {
                        consts
                            .named(name)
                            .ok_or_else(|| ScheduleError::UnknownConstant {
                                block: block.name.clone(),
                                name: name.clone(),
                            })
                    }
                    Operand::Imm(_) => Err(ScheduleError::Malformed {
                        block: block.name.clone(),
                        instr: op.to_string(),
                    }),
                }
            };
            let reg = |x: Fixed| x.align_to(fxp::REG_FMT);
            for instr in &block.ops {
                let arg = |i: usize| read(&instr.args[i], &regs, &state);
                let imm = |i: usize| match instr.args[i] {
                    Operand::Imm(n) => n,
                    _ => unreachable!("checked at parse"),
                };
                let result = match instr.op {
                    OpCode::Mov => arg(1)?,
                    OpCode::Add => reg(arg(1)?).sat_add(reg(arg(2)?)),
                    OpCode::Sub => reg(arg(1)?).sat_sub(reg(arg(2)?)),
                    OpCode::Mul => reg(arg(1)?).mul_rescale(arg(2)?),
                    OpCode::Shr => reg(arg(1)?).shr(imm(2)),
                    OpCode::ShrRound => reg(arg(1)?).shr_round(imm(2)),
                    OpCode::Gt => {
                        let hit = reg(arg(1)?).raw() > reg(arg(2)?).raw();
                        Fixed::from_raw(
                            if hit {
                                1 << fxp::REG_FMT.frac_bits()
                            } else {
                                0
                            },
                            fxp::REG_FMT,
                        )
                    }
                    OpCode::Sel => {
                        if arg(1)?.raw() != 0 {
                            arg(2)?
                        } else {
                            arg(3)?
                        }
                    }
                    OpCode::Spike => {
                        spiked |= arg(0)?.raw() != 0;
                        continue;
                    }
                };
                match &instr.args[0] {
                    Operand::Reg(r) => regs[*r as usize] = reg(result),
                    Operand::Field(name) => {
                        let field: Field =
                            name.parse().map_err(|_| ScheduleError::UnknownField {
                                block: block.name.clone(),
                                field: name.clone(),
                            })?;
                        state.set(field, result);
                    }
                    _ => {
                        return Err(ScheduleError::Malformed {
                            block: block.name.clone(),
                            instr: instr.to_string(),
                        })
                    }
                }
            }
        }
        Ok((state, spiked))
    }
}

impl FromStr for BlockSchedule {
    type Err = ScheduleError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut blocks: Vec<Block> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| ScheduleError::Parse {
                line: line_no,
                message,
            };
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected 'key: value', got '{line}'")))?;
            let value = value.trim();
            match key.trim() {
                "block" => {
                    if value.is_empty() {
                        return Err(err("block name is empty".into()));
                    }
                    blocks.push(Block {
                        name: value.to_string(),
                        word: None,
                        ops: Vec::new(),
                    });
                }
                "word" => {
                    let block = blocks
                        .last_mut()
                        .ok_or_else(|| err("'word' before any 'block'".into()))?;
                    block.word = match value {
                        "none" => None,
                        w => match w.parse::<u8>() {
                            Ok(n) if n <= 2 => Some(n),
                            _ => {
                                return Err(err(format!("word must be 0, 1, 2 or none, got '{w}'")))
                            }
                        },
                    };
                }
                "op" => {
                    let block = blocks
                        .last_mut()
                        .ok_or_else(|| err("'op' before any 'block'".into()))?;
                    block.ops.push(value.parse().map_err(err)?);
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        Ok(BlockSchedule { blocks })
    }
}

impl fmt::Display for BlockSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "block: {}", block.name)?;
            match block.word {
                Some(w) => writeln!(f, "word: {w}")?,
                None => writeln!(f, "word: none")?,
            }
            for op in &block.ops {
                writeln!(f, "op: {op}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(word: Option<u8>, ops: &[&str]) -> BlockSchedule {
        let mut text = String::from("block: test\n");
        match word {
            Some(w) => text.push_str(&format!("word: {w}\n")),
            None => text.push_str("word: none\n"),
        }
        for op in ops {
            text.push_str(&format!("op: {op}\n"));
        }
        text.parse().unwrap()
    }

    #[test]
    fn shipped_schedule_has_no_violations() {
        let s = BlockSchedule::izhikevich();
        assert_eq!(s.blocks.len(), 8);
        assert!(s.validate().unwrap().is_empty());
    }

    #[test]
    fn mixed_word_block_is_flagged() {
        let s = block(Some(2), &["add %r0 $v $c"]);
        let v = s.validate().unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].block, "test");
        assert_eq!(v[0].words, BTreeSet::from([1, 2]));
    }

    #[test]
    fn single_word_block_passes() {
        let s = block(Some(2), &["add %r0 $v $u", "mov %r1 $iconst"]);
        assert!(s.validate().unwrap().is_empty());
        // undeclared word but single field word is also fine
        let s = block(None, &["mov %r1 $iconst"]);
        assert!(s.validate().unwrap().is_empty());
    }

    #[test]
    fn declared_word_counts_toward_the_set() {
        let s = block(Some(0), &["mov %r1 $v"]);
        assert_eq!(s.validate().unwrap()[0].words, BTreeSet::from([0, 2]));
    }

    #[test]
    fn empty_schedule_is_valid() {
        assert!(BlockSchedule::default().validate().unwrap().is_empty());
        assert_eq!(
            "# nothing\n\n".parse::<BlockSchedule>().unwrap(),
            BlockSchedule::default()
        );
    }

    #[test]
    fn unknown_field_is_an_error() {
        let s = block(Some(2), &["mov %r0 $w"]);
        assert_eq!(
            s.validate(),
            Err(ScheduleError::UnknownField {
                block: "test".into(),
                field: "w".into()
            })
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "block: b\nword: 0\nop: frobnicate %r0\n";
        assert!(matches!(
            bad.parse::<BlockSchedule>(),
            Err(ScheduleError::Parse { line: 3, .. })
        ));
        let bad = "op: mov %r0 %r1\n";
        assert!(matches!(
            bad.parse::<BlockSchedule>(),
            Err(ScheduleError::Parse { line: 1, .. })
        ));
        let bad = "block: b\nword: 5\n";
        assert!(matches!(
            bad.parse::<BlockSchedule>(),
            Err(ScheduleError::Parse { line: 2, .. })
        ));
        let bad = "block: b\nop: add %r0 %r1\n";
        assert!(bad.parse::<BlockSchedule>().is_err());
        let bad = "block: b\nop: mov 3 %r1\n";
        assert!(bad.parse::<BlockSchedule>().is_err());
        let bad = "block: b\nop: shr %r0 %r1 %r2\n";
        assert!(bad.parse::<BlockSchedule>().is_err());
        let bad = "block: b\nop: mov %r99 %r1\n";
        assert!(bad.parse::<BlockSchedule>().is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = BlockSchedule::izhikevich();
        let again: BlockSchedule = s.to_string().parse().unwrap();
        assert_eq!(s, again);
    }

    mod equivalence {
        use super::super::*;
        use crate::neuron::{step_fixed, CompartmentFields, NeuronParams};
        use crate::synapse::{decay_alpha_fixed, DEFAULT_TAU_MS};
        use proptest::prelude::*;

        fn field_raw(f: Field) -> impl Strategy<Value = i64> {
            let fmt = f.format();
            fmt.min_raw()..=fmt.max_raw()
        }

        fn words() -> impl Strategy<Value = CompartmentWords> {
            let strategies: Vec<_> = Field::ALL.iter().map(|&f| field_raw(f)).collect();
            strategies.prop_map(|raws| {
                let mut fields = CompartmentFields::default();
                for (f, r) in Field::ALL.iter().zip(raws) {
                    fields.set(*f, r);
                }
                fields.pack().unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(20_000))]
            #[test]
            fn interpreter_matches_step_fixed(
                w in words(),
                da in fxp::DA_FMT.min_raw()..=fxp::DA_FMT.max_raw(),
                beta in -2.0f64..2.0,
            ) {
                let p = NeuronParams::regular_spiking().with_beta(beta);
                let k = GroupConstants::new(&p, decay_alpha_fixed(crate::neuron::DT_MS, DEFAULT_TAU_MS).unwrap()).unwrap();
                let da = Fixed::from_raw(da, fxp::DA_FMT);
                let by_schedule = BlockSchedule::izhikevich().execute(w, da, &k).unwrap();
                prop_assert_eq!(by_schedule, step_fixed(w, da, &k));
            }
        }
    }
}
