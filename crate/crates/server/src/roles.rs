//! Which roles may call which endpoint.

use evalkit_core::model::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Logout,
    Whoami,
    ListEvaluations,
    CreateEvaluation,
    State,
    Submit,
    Ready,
    NextTask,
    Admin,
    JudgeNext,
    JudgeVerdict,
    Export,
    ListTemplates,
    GetTemplate,
    ImportTemplate,
    ListUsers,
    CreateUser,
    ListCollections,
    Media,
}

impl Endpoint {
    pub const ALL: [Endpoint; 19] = [
        Endpoint::Logout,
        Endpoint::Whoami,
        Endpoint::ListEvaluations,
        Endpoint::CreateEvaluation,
        Endpoint::State,
        Endpoint::Submit,
        Endpoint::Ready,
        Endpoint::NextTask,
        Endpoint::Admin,
        Endpoint::JudgeNext,
        Endpoint::JudgeVerdict,
        Endpoint::Export,
        Endpoint::ListTemplates,
        Endpoint::GetTemplate,
        Endpoint::ImportTemplate,
        Endpoint::ListUsers,
        Endpoint::CreateUser,
        Endpoint::ListCollections,
        Endpoint::Media,
    ];
}

pub const ROLES: [Role; 4] = [Role::Admin, Role::Participant, Role::Judge, Role::Viewer];

/// Role gate for authenticated endpoints. Login and the interface
/// description need no session and are not listed.
pub fn permitted(endpoint: Endpoint, role: Role) -> bool {
    use Endpoint::*;
    match endpoint {
        Logout | Whoami | ListEvaluations | State | Media => true,
        Submit => role == Role::Participant,
        Ready | NextTask => matches!(role, Role::Admin | Role::Participant),
        JudgeNext | JudgeVerdict => matches!(role, Role::Admin | Role::Judge),
        CreateEvaluation | Admin | Export | ListTemplates | GetTemplate | ImportTemplate
        | ListUsers | CreateUser | ListCollections => role == Role::Admin,
    }
}
