use super::mid;
use crate::registry::ModuleDescriptor;

pub const CORE_SELECTION: &str = "core.selection/1";
pub const CORE_STORAGE: &str = "core.storage/1";
pub const CORE_MENU: &str = "core.menu/1";
pub const CORE_FOCUS: &str = "core.focus/1";
pub const CORE_MARKING: &str = "core.marking/1";
/// Middleware-hosted document model: provides storage to any application
/// that can report its selection.
pub const ADM_SEMANTIC: &str = "adm.semantic/1";

/// The five application-type independent interaction modules plus the
/// hosted semantic document model.
pub fn standard_modules() -> Vec<ModuleDescriptor> {
    let base = [CORE_SELECTION, CORE_STORAGE, CORE_MENU, CORE_FOCUS, CORE_MARKING]
        .into_iter()
        .map(|id| ModuleDescriptor::base(mid(id), []));
    let adm = ModuleDescriptor::hosted(mid(ADM_SEMANTIC), [mid(CORE_SELECTION)], [mid(CORE_STORAGE)]);
    base.chain(std::iter::once(adm)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ModuleInterfaceId;

    fn ids(list: &[&str]) -> Vec<ModuleInterfaceId> {
        list.iter().map(|s| mid(s)).collect()
    }

    #[test]
    fn six_descriptors() {
        let mods = standard_modules();
        assert_eq!(mods.len(), 6);
        let names: Vec<String> = mods.iter().map(|d| d.id.to_string()).collect();
        assert_eq!(
            names,
            ids(&[CORE_SELECTION, CORE_STORAGE, CORE_MENU, CORE_FOCUS, CORE_MARKING, ADM_SEMANTIC])
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn base_modules_have_no_dependencies() {
        for d in standard_modules().iter().filter(|d| !d.hosted) {
            assert!(d.dependencies.is_empty(), "{} has deps", d.id);
            assert!(d.provides.is_empty());
        }
    }

    #[test]
    fn adm_requires_selection_and_provides_storage() {
        let adm = standard_modules().into_iter().find(|d| d.hosted).unwrap();
        assert_eq!(adm.id, mid(ADM_SEMANTIC));
        assert_eq!(adm.requires().iter().cloned().collect::<Vec<_>>(), vec![mid(CORE_SELECTION)]);
        assert_eq!(adm.provides.iter().cloned().collect::<Vec<_>>(), vec![mid(CORE_STORAGE)]);
    }
}
