use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::GameError;

/// Recommended group size for one game round.
pub const ADVISED_CLASS_SIZE: RangeInclusive<usize> = 5..=10;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub String);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_owned())
    }
}

impl From<&str> for StudentId {
    fn from(s: &str) -> Self {
        StudentId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Student {
    pub student_id: StudentId,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    pub class_id: ClassId,
    pub students: Vec<Student>,
}

impl Roster {
    pub fn new(class_id: ClassId) -> Self {
        Self {
            class_id,
            students: Vec::new(),
        }
    }

    pub fn contains(&self, student: &StudentId) -> bool {
        self.students.iter().any(|s| &s.student_id == student)
    }

    pub fn len(&self) -> usize {
        self.students.len()
    }

    pub fn is_empty(&self) -> bool {
        self.students.is_empty()
    }

    /// Adds a student; returns the size advisory, if the roster is now
    /// outside the recommended range.
    pub fn add_student(&mut self, student_id: StudentId, display_name: String) -> Result<Option<String>, GameError> {
        if self.contains(&student_id) {
            return Err(GameError::DuplicateStudent(student_id));
        }
        self.students.push(Student {
            student_id,
            display_name,
        });
        Ok(self.size_warning())
    }

    /// Rosters outside 5–10 students are allowed, only flagged.
    pub fn size_warning(&self) -> Option<String> {
        let n = self.len();
        if ADVISED_CLASS_SIZE.contains(&n) {
            None
        } else {
            Some(format!(
                "class {} has {n} students; the game is designed for {} to {}",
                self.class_id,
                ADVISED_CLASS_SIZE.start(),
                ADVISED_CLASS_SIZE.end()
            ))
        }
    }
}
