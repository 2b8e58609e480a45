//! Small worked graphs used by tests, examples and the CLI demo.

use crate::graph::{load_triples, KnowledgeGraph};
use crate::paths::PathType;

/// A user who bought a laptop, and two phones that share one feature each
/// with it. `battery` edges carry a quantitative attribute for objective
/// reasoning.
pub const PHONES_TSV: &str = "\
# phones
User\tbought\tLaptop
Laptop\thas\tCutting Edge OS
Red Phone\thas\tCutting Edge OS
Laptop\thas\tLong Duration Battery
Green Phone\thas\tLong Duration Battery
Red Phone\tbattery\tShort Duration Battery
Green Phone\tbattery\tLong Duration Battery
";

pub const PHONES_PATHS: &str = "bought,has,has^-\n";

pub const PHONES_OBJECTIVE: &str = "\
direction: maximize
battery\tShort Duration Battery\t1
battery\tLong Duration Battery\t3
";

/// Two courses linked to a query topic through a shared broader category.
pub const COURSES_TSV: &str = "\
# courses
PME3430\tsubject\tRobotic Sensing
PME3430\tsubject\tAuditive System
PME3479\tsubject\tAuditive System
Sensorial System\tbroader\tRobotic Sensing
Sensorial System\tbroader\tAuditive System
Sensorial System\tbroader\tStochastic Resonance
";

/// `subject,broader^-,broader` read from the query topic towards the course.
pub const COURSES_PATHS: &str = "broader^-,broader,subject^-\n";

pub fn phones() -> KnowledgeGraph {
    load_triples(PHONES_TSV.as_bytes()).expect("fixture parses")
}

pub fn course_topics() -> KnowledgeGraph {
    load_triples(COURSES_TSV.as_bytes()).expect("fixture parses")
}

pub fn phones_path_type(g: &KnowledgeGraph) -> PathType {
    PathType::parse("bought,has,has^-", g).expect("fixture relations")
}

pub fn course_path_type(g: &KnowledgeGraph) -> PathType {
    PathType::parse("subject,broader^-,broader", g)
        .expect("fixture relations")
        .reversed()
}
