//! Program model: parsing, inlining, and resolution of HAL call events.

use std::path::PathBuf;

use thadc_core::frontend::resolve::Value;
use thadc_core::frontend::{load, parse_directives, parse_program, FrontendErrorKind};
use thadc_core::model::{Descriptor, Discriminator};
use thadc_core::spec::{parse_constants, parse_thad_spec, spidev, SPIDEV_LINUX_CONSTS};

fn events(src: &str) -> Vec<String> {
    let prog = load(src, "t.c", &spidev(), 16).expect("program loads");
    let mut evs: Vec<(usize, String)> = prog
        .hal_calls()
        .map(|(n, e)| (prog.cfg.nodes[n].loc.line, e.to_string()))
        .collect();
    evs.sort();
    evs.into_iter().map(|(_, e)| e).collect()
}

#[test]
fn request_macros_resolve_to_named_constants() {
    let src = "\
#define SPI_IOC_MAGIC 'k'
#define SPI_IOC_WR_MODE32 0x40046b05
#define SPI_IOC_MESSAGE_1 0x40206b00
int main(void) {
    int fd = open(\"/dev/spidev0.0\", O_RDWR);
    ioctl(fd, SPI_IOC_WR_MODE32, 0);
    ioctl(fd, SPI_IOC_MESSAGE_1, 0);
    ioctl(fd, 0x1234, 0);
    return 0;
}
";
    let prog = load(src, "t.c", &spidev(), 16).unwrap();
    let discs: Vec<Discriminator> = prog
        .hal_calls()
        .filter_map(|(_, e)| e.discriminator.clone())
        .collect();
    assert_eq!(
        discs,
        vec![
            Discriminator::Named("WR_MODE32".into()),
            Discriminator::Named("MSG".into()),
            Discriminator::Value(0x1234),
        ]
    );
}

#[test]
fn descriptor_tokens_follow_assignments() {
    let src = "\
int main(void) {
    int a = open(\"/dev/spidev0.0\", O_RDWR);
    int b = a;
    read(b, 0, 1);
    return 0;
}
";
    let prog = load(src, "t.c", &spidev(), 16).unwrap();
    let calls: Vec<_> = prog.hal_calls().map(|(_, e)| e.clone()).collect();
    let produced = calls[0].produced.expect("open produces a token");
    assert_eq!(calls[1].descriptor, Some(Descriptor::Token(produced)));
}

#[test]
fn merged_descriptors_become_unknown() {
    let src = "\
int main(int c) {
    int fd;
    if (c) { fd = open(\"/a\", 0); } else { fd = open(\"/b\", 0); }
    read(fd, 0, 1);
    return 0;
}
";
    let prog = load(src, "t.c", &spidev(), 16).unwrap();
    let read = prog
        .hal_calls()
        .find(|(_, e)| e.routine == "read")
        .map(|(_, e)| e.clone())
        .unwrap();
    assert_eq!(read.descriptor, Some(Descriptor::Unknown));
}

#[test]
fn small_integer_sets_survive_joins() {
    assert_eq!(Value::Int(1).meet(&Value::Int(2)), Value::Ints(vec![1, 2]));
    assert_eq!(Value::Int(1).meet(&Value::Int(1)), Value::Int(1));
    assert_eq!(Value::Int(1).meet(&Value::Top), Value::Top);
    let big = Value::from_ints((0..100).collect());
    assert_eq!(big, Value::Top);
}

#[test]
fn calls_to_user_functions_are_inlined_per_site() {
    let src = "\
static void xfer(int fd) { ioctl(fd, MSG, 0); }
int main(void) {
    int fd = open(\"/dev/spidev0.0\", O_RDWR);
    xfer(fd);
    xfer(fd);
    return 0;
}
";
    let evs = events(src);
    assert_eq!(evs.len(), 3, "{evs:?}");
    let prog = load(src, "t.c", &spidev(), 16).unwrap();
    let funcs: Vec<&str> = prog
        .hal_calls()
        .map(|(n, _)| prog.cfg.nodes[n].function.as_str())
        .collect();
    assert_eq!(funcs, vec!["main", "xfer", "xfer"]);
}

#[test]
fn entry_function_must_exist() {
    let err = parse_program("int helper(void) { return 0; }\n", "t.c").unwrap_err();
    assert_eq!(err.kind, FrontendErrorKind::MissingEntry);
}

#[test]
fn syntax_errors_are_located() {
    let err = parse_program("int main(void) {\n    int x = ;\n}\n", "t.c").unwrap_err();
    assert_eq!(err.kind, FrontendErrorKind::SyntaxError);
    assert_eq!(err.loc.line, 2);
    assert!(err.render("t.c").starts_with("t.c:2:"));
}

#[test]
fn directives_select_and_alias() {
    let d =
        parse_directives("// thadc: select d3 d4\n// thadc: alias WR_MODE satisfies WR_MODE32\n")
            .unwrap();
    assert_eq!(d.select, Some(vec!["d3".to_string(), "d4".to_string()]));
    assert_eq!(d.aliases.len(), 1);
    let set = d.apply(&spidev()).unwrap();
    assert_eq!(set.thads.len(), 2);
    assert_eq!(set.aliases.len(), 1);
    let bad = parse_directives("int x;\n// thadc: frobnicate\n").unwrap_err();
    assert_eq!(bad.kind, FrontendErrorKind::InvalidDirective);
    assert_eq!(bad.loc.line, 2);
    let unknown = parse_directives("// thadc: select d99\n").unwrap();
    assert!(unknown.apply(&spidev()).is_err());
}

#[test]
fn shipped_spec_files_match_the_bundled_sets() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let read = |f: &str| std::fs::read_to_string(root.join(f)).unwrap();
    let consts = parse_constants(&read("spidev-linux.consts")).unwrap();
    assert_eq!(consts, parse_constants(SPIDEV_LINUX_CONSTS).unwrap());
    let set = parse_thad_spec(&read("spidev.thad"))
        .unwrap()
        .with_values(&consts);
    assert_eq!(set, spidev());
    let fd = parse_thad_spec(&read("spidev-fd.thad"))
        .unwrap()
        .with_values(&consts);
    assert_eq!(fd, thadc_core::spec::spidev_fd());
    assert!(parse_thad_spec(&read("wr-mode-alias.thad")).is_ok());
}
