"""
Application category registry.

Maps a record's client package name to exactly one AppCategory. Categories
are kept in priority order; the first whose matchers contain the package
wins, and the fallback category catches everything else.
"""

import logging
from typing import Dict, Iterable, List, Optional

from .models import BUILTIN_CATEGORIES, OTHER, TOTAL, AppCategory

logger = logging.getLogger(__name__)


class CategoryRegistry:
    """Priority-ordered registry of application categories."""

    def __init__(self, categories: Optional[Iterable[AppCategory]] = None, fallback: AppCategory = OTHER):
        self.categories: List[AppCategory] = []
        self._by_package: Dict[str, AppCategory] = {}
        self._priorities: Dict[str, int] = {}
        self.fallback = fallback
        for category in categories if categories is not None else BUILTIN_CATEGORIES:
            if not category.fallback:
                self.register(category)

    def register(self, category: AppCategory, priority: int = 100) -> None:
        """Register a category; lower priority numbers are consulted first."""
        if category.name in (TOTAL.name, self.fallback.name):
            raise ValueError(f"'{category.name}' is a reserved category name")
        if category.fallback:
            raise ValueError("only one fallback category is allowed")

        self.unregister(category.name)
        self.categories.append(category)
        self._priorities[category.name] = priority
        self.categories.sort(key=lambda c: self._priorities[c.name])
        self._rebuild_index()
        logger.info(f"Registered app category: {category.name} (priority: {priority})")

    def unregister(self, name: str) -> bool:
        for i, category in enumerate(self.categories):
            if category.name == name:
                self.categories.pop(i)
                self._priorities.pop(name, None)
                self._rebuild_index()
                logger.debug(f"Unregistered app category: {name}")
                return True
        return False

    def _rebuild_index(self) -> None:
        # Higher-priority categories claim shared package names.
        self._by_package = {}
        for category in reversed(self.categories):
            for package in category.matchers:
                self._by_package[package] = category

    def classify(self, app: str) -> AppCategory:
        """The single category a client package belongs to."""
        return self._by_package.get(app.strip().upper(), self.fallback)

    def resolve(self, name: str) -> AppCategory:
        """Look up a category (or ``total``) by its name."""
        key = name.strip().lower()
        if key == TOTAL.name:
            return TOTAL
        if key == self.fallback.name:
            return self.fallback
        for category in self.categories:
            if category.name == key:
                return category
        raise KeyError(f"Unknown app category: {name}")

    def names(self, include_total: bool = True) -> List[str]:
        names = [c.name for c in self.categories] + [self.fallback.name]
        return names + [TOTAL.name] if include_total else names

    def all_categories(self) -> List[AppCategory]:
        return list(self.categories) + [self.fallback]


_default_registry: Optional[CategoryRegistry] = None


def get_default_registry() -> CategoryRegistry:
    """The process-wide registry holding the built-in categories."""
    global _default_registry
    if _default_registry is None:
        _default_registry = CategoryRegistry()
    return _default_registry
