/** Template composer: pick a starter, edit the text, submit. */

import { esc } from "../format.js";
import { TEMPLATE_CATALOG } from "../templates.js";

export function renderComposer(selected: number, draft: string): string {
  const options = TEMPLATE_CATALOG.map(
    (entry, i) =>
      `<option value="${i}" ${i === selected ? "selected" : ""}>${esc(entry.name)}</option>`,
  ).join("\n");
  const summary = TEMPLATE_CATALOG[selected]?.summary ?? "";
  return `<section class="panel"><h2>Compose</h2>
<form data-form="compose">
<label>starter
<select name="catalog">${options}</select>
</label>
<p class="empty">${esc(summary)}</p>
<textarea name="template" rows="24" spellcheck="false">${esc(draft)}</textarea>
<button type="submit">submit deployment</button>
</form>
</section>`;
}
