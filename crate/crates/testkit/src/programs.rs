//! Random MiniC client programs of the spidev HAL-API.
//!
//! Branch conditions only test `main` parameters or call results, which
//! the analyses treat as unknown, so every branch is nondeterministic.
//! Discriminators are always literal request constants.

use rand::seq::SliceRandom;
use rand::Rng;

/// Request constants of the bundled spidev specification.
pub const REQUESTS: [&str; 11] = [
    "MSG",
    "RD_MODE",
    "WR_MODE",
    "RD_MODE32",
    "WR_MODE32",
    "RD_LSB_FIRST",
    "WR_LSB_FIRST",
    "RD_BITS_PER_WORD",
    "WR_BITS_PER_WORD",
    "RD_MAX_SPEED_HZ",
    "WR_MAX_SPEED_HZ",
];

const PARAMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramShape {
    /// Upper bound on HAL call sites after inlining.
    pub max_hal_calls: usize,
    /// Upper bound on `if`/`switch` statements after inlining.
    pub max_branches: usize,
    /// Include exactly one loop in `main`.
    pub with_loop: bool,
    /// Upper bound on `open` call sites after inlining.
    pub max_opens: usize,
}

impl ProgramShape {
    pub const LOOP_FREE: ProgramShape = ProgramShape {
        max_hal_calls: 12,
        max_branches: 4,
        with_loop: false,
        max_opens: 12,
    };

    pub const ONE_LOOP: ProgramShape = ProgramShape {
        max_hal_calls: 8,
        max_branches: 3,
        with_loop: true,
        max_opens: 8,
    };
}

struct Budget {
    calls: usize,
    branches: usize,
    opens: usize,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    out: String,
    /// Inside the helper function, where `fd` is a parameter.
    in_helper: bool,
    helper_cost: Option<Budget>,
    loop_left: bool,
}

fn indent(depth: usize) -> String {
    "    ".repeat(depth)
}

impl<R: Rng> Gen<'_, R> {
    /// A random unknown parameter in scope.
    fn param(&mut self) -> usize {
        if self.in_helper {
            0
        } else {
            self.rng.gen_range(0..PARAMS)
        }
    }

    fn cond(&mut self) -> String {
        let p = self.param();
        match self.rng.gen_range(0..3) {
            0 => format!("p{p} > 0"),
            1 => format!("p{p} == {}", self.rng.gen_range(0..3)),
            _ => format!("!p{p}"),
        }
    }

    fn hal_call(&mut self, b: &mut Budget, depth: usize) {
        b.calls -= 1;
        let pad = indent(depth);
        let mut choices = vec![1, 2, 3, 4, 4, 4];
        if b.opens > 0 && !self.in_helper {
            choices.extend([0, 0]);
        }
        match *choices.choose(self.rng).expect("nonempty") {
            0 => {
                b.opens -= 1;
                self.out
                    .push_str(&format!("{pad}fd = open(\"/dev/spidev0.0\", O_RDWR);\n"));
            }
            1 => self.out.push_str(&format!("{pad}rc = read(fd, buf, 4);\n")),
            2 => self.out.push_str(&format!("{pad}write(fd, buf, 4);\n")),
            3 => self.out.push_str(&format!("{pad}close(fd);\n")),
            _ => {
                let req = REQUESTS.choose(self.rng).expect("nonempty");
                self.out
                    .push_str(&format!("{pad}rc = ioctl(fd, {req}, &arg);\n"));
            }
        }
    }

    fn block(&mut self, b: &mut Budget, depth: usize, allow_return: bool) {
        let n = self.rng.gen_range(0..=3);
        for _ in 0..n {
            if b.calls == 0 {
                break;
            }
            self.stmt(b, depth, allow_return);
        }
        if allow_return && depth > 1 && self.rng.gen_bool(0.15) {
            self.out.push_str(&format!(
                "{}return {};\n",
                indent(depth),
                self.rng.gen_range(0..2)
            ));
        }
    }

    fn stmt(&mut self, b: &mut Budget, depth: usize, allow_return: bool) {
        let pad = indent(depth);
        let roll = self.rng.gen_range(0..100);
        if roll < 20 && b.branches > 0 {
            b.branches -= 1;
            if self.rng.gen_bool(0.2) {
                let p = self.param();
                self.out.push_str(&format!("{pad}switch (p{p}) {{\n"));
                for label in ["case 0:", "case 1:", "default:"] {
                    self.out.push_str(&format!("{pad}{label}\n"));
                    self.block(b, depth + 1, false);
                    self.out.push_str(&format!("{}break;\n", indent(depth + 1)));
                }
                self.out.push_str(&format!("{pad}}}\n"));
            } else {
                let c = if self.rng.gen_bool(0.3) {
                    "rc < 0".to_string()
                } else {
                    self.cond()
                };
                self.out.push_str(&format!("{pad}if ({c}) {{\n"));
                self.block(b, depth + 1, allow_return);
                if self.rng.gen_bool(0.5) {
                    self.out.push_str(&format!("{pad}}} else {{\n"));
                    self.block(b, depth + 1, allow_return);
                }
                self.out.push_str(&format!("{pad}}}\n"));
            }
        } else if roll < 30 && self.loop_left && !self.in_helper {
            self.loop_left = false;
            let p = self.param();
            if self.rng.gen_bool(0.5) {
                self.out.push_str(&format!("{pad}while (p{p} > 0) {{\n"));
                self.block(b, depth + 1, false);
                self.out
                    .push_str(&format!("{}p{p} = p{p} - 1;\n", indent(depth + 1)));
            } else {
                self.out
                    .push_str(&format!("{pad}for (i = 0; i < p{p}; i++) {{\n"));
                self.block(b, depth + 1, false);
            }
            self.out.push_str(&format!("{pad}}}\n"));
        } else if roll < 40 && !self.in_helper {
            if let Some(h) = &self.helper_cost {
                if h.calls <= b.calls && h.branches <= b.branches && h.opens <= b.opens {
                    b.calls -= h.calls;
                    b.branches -= h.branches;
                    b.opens -= h.opens;
                    let p = self.param();
                    self.out.push_str(&format!("{pad}rc = helper(fd, p{p});\n"));
                    return;
                }
            }
            self.hal_call(b, depth);
        } else {
            self.hal_call(b, depth);
        }
    }
}

/// A random client program with entry `main`. Declares `fd`, `rc`, `arg`,
/// `buf` and `i` locally and takes four unknown parameters `p0`..`p3`.
pub fn random_program<R: Rng>(rng: &mut R, shape: ProgramShape) -> String {
    let mut g = Gen {
        rng,
        out: String::new(),
        in_helper: false,
        helper_cost: None,
        loop_left: false,
    };
    let mut text = String::from("char buf[4];\nint arg;\n\n");
    // Optional helper, inlined at each call site.
    if g.rng.gen_bool(0.4) && shape.max_hal_calls >= 4 {
        let mut hb = Budget {
            calls: g.rng.gen_range(1..=3).min(shape.max_hal_calls / 2),
            branches: usize::from(shape.max_branches > 1 && g.rng.gen_bool(0.5)),
            opens: 0,
        };
        let start = hb.calls;
        let branches = hb.branches;
        g.in_helper = true;
        g.out
            .push_str("static int helper(int fd, int p0) {\n    int rc = 0;\n");
        g.block(&mut hb, 1, false);
        g.out.push_str("    return rc;\n}\n\n");
        g.in_helper = false;
        g.helper_cost = Some(Budget {
            calls: start - hb.calls,
            branches: branches - hb.branches,
            opens: 0,
        });
        text.push_str(&std::mem::take(&mut g.out));
    }
    let params: Vec<String> = (0..PARAMS).map(|i| format!("int p{i}")).collect();
    g.out.push_str(&format!(
        "int main({}) {{\n    int fd = -1;\n    int rc = 0;\n    int i;\n",
        params.join(", ")
    ));
    let mut b = Budget {
        calls: shape.max_hal_calls,
        branches: shape.max_branches,
        opens: shape.max_opens,
    };
    g.loop_left = shape.with_loop;
    let target = g.rng.gen_range(1..=shape.max_hal_calls);
    while shape.max_hal_calls - b.calls < target && b.calls > 0 {
        g.stmt(&mut b, 1, true);
    }
    if g.loop_left {
        let p = g.rng.gen_range(0..PARAMS);
        g.loop_left = false;
        g.out.push_str(&format!("    while (p{p} > 0) {{\n"));
        g.block(&mut b, 2, false);
        g.out
            .push_str(&format!("        p{p} = p{p} - 1;\n    }}\n"));
        if b.calls > 0 {
            g.hal_call(&mut b, 1);
        }
    }
    g.out.push_str("    return 0;\n}\n");
    text.push_str(&g.out);
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use thadc_core::frontend::load;
    use thadc_core::spec::spidev;

    #[test]
    fn generated_programs_parse_and_respect_bounds() {
        let set = spidev();
        for seed in 0..200 {
            let shape = if seed % 2 == 0 {
                ProgramShape::LOOP_FREE
            } else {
                ProgramShape::ONE_LOOP
            };
            let src = random_program(&mut rng(seed), shape);
            let prog = load(&src, "gen.c", &set, 16)
                .unwrap_or_else(|e| panic!("{}\n{src}", e.render("gen.c")));
            assert!(prog.hal_calls().count() <= shape.max_hal_calls, "{src}");
            let branches = prog
                .cfg
                .nodes
                .iter()
                .filter(|n| matches!(n.kind, thadc_core::frontend::cfg::NodeKind::Branch { .. }))
                .count();
            let loops = prog
                .cfg
                .nodes
                .iter()
                .flat_map(|n| &n.succs)
                .filter(|e| e.back)
                .count();
            assert_eq!(loops, usize::from(shape.with_loop), "{src}");
            assert!(
                branches <= shape.max_branches + usize::from(shape.with_loop),
                "{src}"
            );
        }
    }

    #[test]
    fn same_seed_same_program() {
        let a = random_program(&mut rng(7), ProgramShape::LOOP_FREE);
        let b = random_program(&mut rng(7), ProgramShape::LOOP_FREE);
        assert_eq!(a, b);
    }
}
