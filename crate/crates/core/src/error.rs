use thiserror::Error as ThisError;

use crate::content::ContentError;
use crate::format::FormatError;
use crate::harness::HarnessError;
use crate::mesh::MeshError;
use crate::physics::PhysicsError;
use crate::scene::SceneError;
use crate::slicer::SliceError;
use crate::spectral::SpectralError;
use crate::widgets::WidgetError;

/// Any error raised by the core library.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Widget(#[from] WidgetError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Coarse grouping used by frontends to pick HTTP statuses and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input or a request the scene cannot satisfy.
    Invalid,
    /// A referenced id does not exist.
    NotFound,
    /// A user-supplied file is missing, unreadable or of the wrong kind.
    File,
    /// Writing output failed.
    Io,
    /// Solver failure or numerical blowup.
    Internal,
}

pub(crate) fn mesh_code(e: &MeshError) -> &'static str {
    match e {
        MeshError::FileNotFound(_) => "FileNotFound",
        MeshError::ParseError { .. } => "ParseError",
        MeshError::EmptyMesh => "EmptyMesh",
        MeshError::IndexOutOfBounds { .. } => "ParseError",
        MeshError::MaterialCount { .. } => "InvalidMesh",
        MeshError::UnsupportedFormat(_) => "UnsupportedFormat",
        MeshError::Io { .. } => "IoError",
    }
}

pub(crate) fn slice_code(e: &SliceError) -> &'static str {
    match e {
        SliceError::NoIntersection => "NoIntersection",
        SliceError::NonWatertightInput => "NonWatertightInput",
        SliceError::DegenerateCut => "DegenerateCut",
        SliceError::InvalidPlane(_) => "InvalidPlane",
    }
}

pub(crate) fn spectral_code(e: &SpectralError) -> &'static str {
    match e {
        SpectralError::TooFewTriangles(_) => "TooFewTriangles",
        SpectralError::ConvergenceFailure(_) => "ConvergenceFailure",
        SpectralError::InvalidParameter(_) => "InvalidParameter",
    }
}

pub(crate) fn physics_code(e: &PhysicsError) -> &'static str {
    match e {
        PhysicsError::UnknownSegment(_) => "UnknownSegment",
        PhysicsError::UnknownJoint(_) => "UnknownJoint",
        PhysicsError::SameSegment(_) => "SameSegment",
        PhysicsError::DuplicateJoint(_) => "DuplicateJoint",
        PhysicsError::CyclicBaseChain(_) => "CyclicBaseChain",
        PhysicsError::InvalidJoint(_) => "InvalidJoint",
        PhysicsError::NoSharedInterface => "NoSharedInterface",
        PhysicsError::NumericalBlowup { .. } => "NumericalBlowup",
        PhysicsError::InvalidTimestep(_) => "InvalidTimestep",
        PhysicsError::InvalidTouch(_) => "InvalidTouch",
    }
}

pub(crate) fn widget_code(e: &WidgetError) -> &'static str {
    match e {
        WidgetError::UnknownWidget(_) => "UnknownWidget",
        WidgetError::UnknownSegment(_) => "UnknownSegment",
        WidgetError::EventKindMismatch { .. } => "EventKindMismatch",
        WidgetError::InvalidSubtype(_) => "InvalidSubtype",
        WidgetError::InvalidPlacement(_) => "InvalidPlacement",
        WidgetError::InvalidEvent(_) => "InvalidEvent",
    }
}

fn content_code(e: &ContentError) -> &'static str {
    match e {
        ContentError::FileNotFound(_) => "FileNotFound",
        ContentError::UnsupportedFormat(_) => "UnsupportedFormat",
        ContentError::UnknownContent(_) => "UnknownContent",
        ContentError::UnknownTarget(_) => "UnknownTarget",
        ContentError::RoleMismatch(_) => "RoleMismatch",
        ContentError::ChecksumMismatch { .. } => "ChecksumMismatch",
        ContentError::Catalog(_) => "CatalogError",
        ContentError::Io(_) => "IoError",
    }
}

fn format_code(e: &FormatError) -> &'static str {
    match e {
        FormatError::ParseError(_) => "ParseError",
        FormatError::UnknownVersion(_) => "UnknownVersion",
        FormatError::ChecksumMismatch { .. } => "ChecksumMismatch",
        FormatError::ValidationFailure(_) => "ValidationFailure",
        FormatError::IoError(_) => "IoError",
    }
}

fn physics_class(e: &PhysicsError) -> ErrorClass {
    match e {
        PhysicsError::UnknownSegment(_) | PhysicsError::UnknownJoint(_) => ErrorClass::NotFound,
        PhysicsError::NumericalBlowup { .. } => ErrorClass::Internal,
        _ => ErrorClass::Invalid,
    }
}

impl Error {
    /// Stable name of the error kind, as reported by the CLI and the service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Mesh(e) => mesh_code(e),
            Error::Slice(e) => slice_code(e),
            Error::Spectral(e) => spectral_code(e),
            Error::Scene(SceneError::UnknownSegment(_)) => "UnknownSegment",
            Error::Scene(SceneError::SegmentInUse { .. }) => "SegmentInUse",
            Error::Scene(SceneError::Slice(e)) => slice_code(e),
            Error::Scene(SceneError::Spectral(e)) => spectral_code(e),
            Error::Physics(e) => physics_code(e),
            Error::Widget(e) => widget_code(e),
            Error::Content(e) => content_code(e),
            Error::Format(e) => format_code(e),
            Error::Harness(HarnessError::ScriptError { .. }) => "ScriptError",
            Error::Harness(HarnessError::InvalidScene(_)) => "ValidationFailure",
            Error::Harness(HarnessError::StepFailed { source, .. }) => physics_code(source),
            Error::Harness(HarnessError::IoError(_)) => "IoError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Mesh(MeshError::Io { .. }) => ErrorClass::Io,
            Error::Mesh(MeshError::FileNotFound(_) | MeshError::UnsupportedFormat(_)) => ErrorClass::File,
            Error::Mesh(_) => ErrorClass::File,
            Error::Slice(_) => ErrorClass::Invalid,
            Error::Spectral(SpectralError::ConvergenceFailure(_)) => ErrorClass::Internal,
            Error::Spectral(_) => ErrorClass::Invalid,
            Error::Scene(SceneError::UnknownSegment(_)) => ErrorClass::NotFound,
            Error::Scene(SceneError::SegmentInUse { .. } | SceneError::Slice(_)) => ErrorClass::Invalid,
            Error::Scene(SceneError::Spectral(SpectralError::ConvergenceFailure(_))) => ErrorClass::Internal,
            Error::Scene(SceneError::Spectral(_)) => ErrorClass::Invalid,
            Error::Physics(e) => physics_class(e),
            Error::Widget(WidgetError::UnknownWidget(_) | WidgetError::UnknownSegment(_)) => ErrorClass::NotFound,
            Error::Widget(_) => ErrorClass::Invalid,
            Error::Content(ContentError::UnknownContent(_) | ContentError::UnknownTarget(_)) => ErrorClass::NotFound,
            Error::Content(ContentError::FileNotFound(_) | ContentError::UnsupportedFormat(_)) => ErrorClass::File,
            Error::Content(ContentError::Catalog(_) | ContentError::ChecksumMismatch { .. }) => ErrorClass::File,
            Error::Content(ContentError::Io(_)) => ErrorClass::Io,
            Error::Content(ContentError::RoleMismatch(_)) => ErrorClass::Invalid,
            Error::Format(FormatError::ValidationFailure(_)) => ErrorClass::Invalid,
            Error::Format(FormatError::IoError(_)) => ErrorClass::Io,
            Error::Format(_) => ErrorClass::File,
            Error::Harness(HarnessError::ScriptError { .. }) => ErrorClass::File,
            Error::Harness(HarnessError::InvalidScene(_)) => ErrorClass::Invalid,
            Error::Harness(HarnessError::StepFailed { source, .. }) => physics_class(source),
            Error::Harness(HarnessError::IoError(_)) => ErrorClass::Io,
        }
    }
}
