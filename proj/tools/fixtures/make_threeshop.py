#!/usr/bin/env python3
"""Regenerates data/worlds/threeshop.json.

The fixture is checked in; rerun this only when changing the world layout.
Usage: python3 tools/fixtures/make_threeshop.py > data/worlds/threeshop.json
"""
import json
import sys

SITES = [
    {
        "site_id": "shopsite",
        "display_name": "OneStop Market",
        "descriptor": "An online store for furniture, lighting, kitchen goods and garden supplies. "
                      "Popular items include the oak desk, office chair, desk lamp, ceiling fan, "
                      "coffee maker, chef knife, garden hose and flower pot.",
        "search_caption": "Search products",
        "session_var": "cart",
        "attrs": ["Price", "Rating"],
        "categories": [
            ("Furniture", [("Oak Desk", "desk", ["$249.00", "4.6"]),
                           ("Office Chair", "chair", ["$129.50", "4.2"]),
                           ("Tall Bookshelf", "bookshelf", ["$89.99", "3.9"])]),
            ("Lighting", [("Desk Lamp", "lamp", ["$34.99", "4.4"]),
                          ("Ceiling Fan", "fan", ["$159.00", "4.1"]),
                          ("Pendant Light", "pendant", ["$74.25", "4.7"])]),
            ("Kitchen", [("Coffee Maker", "coffee", ["$59.95", "4.3"]),
                         ("Chef Knife", "knife", ["$42.00", "4.8"]),
                         ("Steel Toaster", "toaster", ["$38.49", "3.7"]),
                         ("Spice Rack", "spice", ["$19.99", "4.0"]),
                         ("Cutting Board", "board", ["$24.75", "4.5"]),
                         ("Water Kettle", "kettle", ["$31.20", "4.2"])]),
            ("Garden", [("Garden Hose", "hose", ["$27.80", "4.0"]),
                        ("Flower Pot", "pot", ["$12.99", "4.6"])]),
            ("Patio", [("Patio Umbrella", "umbrella", ["$64.00", "4.3"]),
                       ("Lounge Chair", "lounge", ["$119.00", "4.1"])]),
        ],
        "extras": [("Help Center", "Answers to common shopping questions."),
                   ("Store Deals", "Weekly discounts on selected products.")],
    },
    {
        "site_id": "mapsite",
        "display_name": "OpenMap",
        "descriptor": "A map service to search places and view addresses for restaurants, museums, "
                      "parks and hotels such as the city museum, river park, harbor hotel, "
                      "noodle house and pizza corner.",
        "search_caption": "Search places",
        "session_var": "favorites",
        "attrs": ["Zip code", "Phone"],
        "categories": [
            ("Restaurants", [("Noodle House", "noodle", ["15213", "4125550101"]),
                             ("Pizza Corner", "pizza", ["15232", "4125550102"]),
                             ("Taco Stand", "taco", ["15206", "4125550103"])]),
            ("Museums", [("City Museum", "museum", ["15219", "4125550201"]),
                         ("Science Center", "science", ["15212", "4125550202"]),
                         ("Art Gallery", "gallery", ["15222", "4125550203"])]),
            ("Parks", [("River Park", "river", ["15201", "4125550301"]),
                       ("Hilltop Garden", "hilltop", ["15217", "4125550302"]),
                       ("Frick Woods", "woods", ["15218", "4125550303"]),
                       ("Lake Trail", "lake", ["15237", "4125550304"]),
                       ("Dog Run", "dog", ["15203", "4125550305"]),
                       ("Rose Meadow", "meadow", ["15210", "4125550306"])]),
            ("Hotels", [("Harbor Hotel", "harbor", ["15222", "4125550401"]),
                        ("Station Inn", "inn", ["15233", "4125550402"])]),
            ("Libraries", [("Carnegie Library", "carnegie", ["15213", "4125550501"]),
                           ("Oakland Archive", "archive", ["15260", "4125550502"])]),
        ],
        "extras": [("Map Help", "How to search places and read addresses."),
                   ("Saved Places", "Places you saved appear here.")],
    },
    {
        "site_id": "forumsite",
        "display_name": "Postmill Forum",
        "descriptor": "A discussion forum with communities about books, movies and gaming. "
                      "Well known threads include the reading list, classic novels, film reviews, "
                      "movie trivia, speedrun tips and retro consoles.",
        "search_caption": "Search forums",
        "session_var": "bookmarks",
        "attrs": ["Comments", "Author"],
        "categories": [
            ("Books", [("Reading List", "reading", ["48", "maya"]),
                       ("Classic Novels", "novels", ["131", "tomas"]),
                       ("Poetry Corner", "poetry", ["17", "lena"])]),
            ("Movies", [("Film Reviews", "reviews", ["96", "omar"]),
                        ("Movie Trivia", "trivia", ["23", "kira"]),
                        ("Indie Cinema", "indie", ["12", "paolo"])]),
            ("Gaming", [("Speedrun Tips", "speedrun", ["57", "jin"]),
                        ("Retro Consoles", "retro", ["84", "ada"]),
                        ("Puzzle Games", "puzzle", ["29", "nils"]),
                        ("Board Nights", "nights", ["11", "rosa"]),
                        ("Modding Guide", "modding", ["63", "ivan"]),
                        ("Esports News", "esports", ["140", "mei"])]),
            ("Science", [("Space Photos", "space", ["72", "yuki"]),
                         ("Chemistry Lab", "chemistry", ["19", "ben"])]),
            ("Music", [("Vinyl Swap", "vinyl", ["35", "leo"]),
                       ("Guitar Chords", "guitar", ["44", "nora"])]),
        ],
        "extras": [("Forum Rules", "Be kind and stay on topic."),
                   ("Member Guide", "How to post, bookmark and search.")],
    },
]


def slug(text):
    return "_".join(text.lower().split())


def build_site(spec):
    sid = spec["site_id"]
    var = spec["session_var"]
    pages = []
    search_index = {}
    verifiers = {}

    home_elements = [{"id": "search_box", "kind": "textbox", "caption": spec["search_caption"],
                      "row": 2, "effect": {"submit_search": True}}]
    row = 4
    for cat, _ in spec["categories"]:
        home_elements.append({"id": "nav_" + slug(cat), "kind": "link", "caption": cat,
                              "row": row, "effect": {"go_to": "cat_" + slug(cat)}})
        row += 2
    for title, _ in spec["extras"]:
        home_elements.append({"id": "nav_" + slug(title), "kind": "link", "caption": title,
                              "row": row, "effect": {"go_to": "info_" + slug(title)}})
        row += 2
    home_elements.append({"id": "sign_in", "kind": "button", "caption": "Sign in",
                          "row": row, "effect": None})
    pages.append({"page_id": "home", "title": spec["display_name"], "page_height": 20,
                  "static_text": [{"row": 0, "text": "Welcome to " + spec["display_name"]},
                                  {"row": 1, "text": spec["descriptor"].split(". ")[0] + "."}],
                  "elements": home_elements})

    item_counter = 0
    for cat, items in spec["categories"]:
        cat_id = "cat_" + slug(cat)
        elements = [{"id": "home", "kind": "link", "caption": "Home", "row": 1,
                     "effect": {"go_to": "home"}}]
        item_row = 3
        for name, head, _ in items:
            elements.append({"id": "open_" + slug(name), "kind": "link", "caption": name,
                             "row": item_row, "effect": {"go_to": "products_" + head}})
            item_row += 4
        height = max(20, item_row)
        pages.append({"page_id": cat_id, "title": cat, "page_height": height,
                      "static_text": [{"row": 0, "text": "Showing %d entries in %s" % (len(items), cat)}],
                      "elements": elements})
        key = cat.lower()
        assert key not in search_index
        search_index[key] = [cat_id]
        verifiers["nav_" + cat_id] = "page_is:" + cat_id

        for name, head, values in items:
            item_counter += 1
            item_page = "products_" + head
            item_id = "item_%d" % item_counter
            text = [{"row": 0, "text": name}]
            for i, (attr, value) in enumerate(zip(spec["attrs"], values)):
                text.append({"row": 3 + i, "text": "%s: %s" % (attr, value)})
                verifiers["ans_%s_%s" % (item_page, slug(attr))] = "answer_equals:" + value
            pages.append({"page_id": item_page, "title": name, "page_height": 20,
                          "static_text": text,
                          "elements": [
                              {"id": "home", "kind": "link", "caption": "Home", "row": 1,
                               "effect": {"go_to": "home"}},
                              {"id": "add_" + var, "kind": "button", "caption": "Add to " + var,
                               "row": 6,
                               "effect": {"mutate_session": {"var": var, "op": "add", "value": item_id}}},
                          ]})
            assert head not in search_index, head
            search_index[head] = [item_page]
            verifiers["nav_" + item_page] = "page_is:" + item_page
            verifiers["add_" + item_page] = "session:%s contains %s" % (var, item_id)

    for title, blurb in spec["extras"]:
        pid = "info_" + slug(title)
        pages.append({"page_id": pid, "title": title, "page_height": 20,
                      "static_text": [{"row": 0, "text": title}, {"row": 2, "text": blurb}],
                      "elements": [{"id": "home", "kind": "link", "caption": "Home", "row": 1,
                                    "effect": {"go_to": "home"}}]})
        verifiers["nav_" + pid] = "page_is:" + pid

    for page in pages:
        for el in page["elements"]:
            if el["effect"] is None:
                del el["effect"]

    return {
        "site_id": sid,
        "display_name": spec["display_name"],
        "descriptor": spec["descriptor"],
        "entry_page": "home",
        "session_schema": [{"name": var, "initial": []}],
        "search_index": search_index,
        "verifiers": verifiers,
        "pages": pages,
    }


def main():
    world = {"schema_version": 1, "world": "threeshop", "sites": [build_site(s) for s in SITES]}
    json.dump(world, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
