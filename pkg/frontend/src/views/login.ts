/** Login form: external credential (issuer, subject) exchanged for a bearer token. */

export const KNOWN_IDENTITIES = [
  { issuer: "campus", subject: "ada" },
  { issuer: "local", subject: "root" },
];

export function renderLogin(): string {
  const issuers = [...new Set(KNOWN_IDENTITIES.map((k) => k.issuer))]
    .map((v) => `<option value="${v}">`)
    .join("");
  const subjects = [...new Set(KNOWN_IDENTITIES.map((k) => k.subject))]
    .map((v) => `<option value="${v}">`)
    .join("");
  return `<section class="panel narrow"><h2>Sign in</h2>
<form data-form="login">
<label>issuer <input name="issuer" list="issuers" required value="campus"></label>
<datalist id="issuers">${issuers}</datalist>
<label>subject <input name="subject" list="subjects" required value="ada"></label>
<datalist id="subjects">${subjects}</datalist>
<button type="submit">log in</button>
</form>
</section>`;
}
