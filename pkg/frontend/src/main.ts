import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
new App(root).start();
