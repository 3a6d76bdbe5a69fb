/** Recorded fixture catalog for offline development and tests. */

export interface FixtureItem {
  item_id: string;
  title: string;
  description: string;
  semantic_type: string;
}

const WORDS = [
  "amber", "breezy", "coastal", "velvet", "midnight", "linen",
  "golden", "urban", "floral", "rustic", "pastel", "monochrome",
];

function buildItems(): FixtureItem[] {
  const items: FixtureItem[] = [];
  for (const type of ["tops", "bottoms", "shoes"]) {
    for (let i = 0; i < 8; i++) {
      const a = WORDS[(i * 3) % WORDS.length];
      const b = WORDS[(i * 5 + 2) % WORDS.length];
      items.push({
        item_id: `mock-${type}-${String(i).padStart(2, "0")}`,
        title: `${a} ${b} ${type}`,
        description: `${b} ${type} piece with ${a} accents`,
        semantic_type: type,
      });
    }
  }
  return items;
}

export const FIXTURE_ITEMS: FixtureItem[] = buildItems();
